//! Built-in reference stack-up and via definitions.
//!
//! A 12-metal-layer sub-laminate with a blind via entering at L1, breaking
//! out at L10 and leaving a two-layer (about 11 mil) stub to L12.

use crate::synth::{Layer, LayerMaterial, StackUp, ViaGeometry};

pub const MIL_PER_MM: f64 = 1.0 / 0.0254;

/// Bottom-pad diameters (mm) from padless to full pad.
pub const BOTTOM_PAD_SWEEP_MM: [f64; 6] = [0.2510, 0.2918, 0.3326, 0.3734, 0.4142, 0.4550];

const METAL_KINDS: [LayerMaterial; 12] = {
    use LayerMaterial::{Plane as P, Signal as S};
    [S, P, S, P, S, P, P, S, P, S, P, S]
};

pub fn reference_stackup() -> StackUp {
    let mut layers = Vec::new();
    let mut metal_layers = Vec::new();
    for (i, kind) in METAL_KINDS.iter().enumerate() {
        metal_layers.push(layers.len());
        layers.push(Layer {
            name: format!("L{}", i + 1),
            thickness: 0.6,
            material: *kind,
        });
        if i + 1 < METAL_KINDS.len() {
            layers.push(Layer {
                name: format!("D{}", i + 1),
                thickness: 5.0,
                material: LayerMaterial::Dielectric,
            });
        }
    }
    StackUp {
        layers,
        er_inplane: 3.6,
        er_outofplane: 3.3,
        metal_layers,
    }
}

/// Nominal via: 8 mil barrel, 36 mil antipads, 16 mil launch and escape
/// pads, padless elsewhere.
pub fn reference_via() -> (ViaGeometry, StackUp) {
    layer10_breakout_via(BOTTOM_PAD_SWEEP_MM[0])
}

/// The reference via with the L12 (stub end) pad set to `bottom_pad_mm`.
pub fn layer10_breakout_via(bottom_pad_mm: f64) -> (ViaGeometry, StackUp) {
    let stack = reference_stackup();
    let n = stack.metal_layers.len();
    let mut pads = vec![0.0; n];
    pads[0] = 16.0;
    pads[9] = 16.0;
    pads[11] = bottom_pad_mm * MIL_PER_MM;
    let geom = ViaGeometry {
        drill_diameter: 8.0,
        plated_od: 8.0,
        wicking_depth: 0.0,
        pad_diameter: pads,
        antipad_diameter: vec![36.0; n],
        entry_layer: 1,
        exit_layer: 10,
        stub_span: 2,
        layer_shift: Vec::new(),
    };
    (geom, stack)
}

/// Reference via with escape pads enlarged and non-functional pads left in,
/// as a fabricator might build it without instruction.
pub fn enlarged_pad_via() -> (ViaGeometry, StackUp) {
    let (mut geom, stack) = reference_via();
    geom.pad_diameter = geom
        .pad_diameter
        .iter()
        .enumerate()
        .map(|(i, &p)| match i {
            0 | 9 => 24.0,
            11 => p,
            _ => 14.0,
        })
        .collect();
    (geom, stack)
}

/// Capture-pad diameters (mil) of the two laser blind via builds.
pub const VENDOR1_LASER_PAD_MIL: f64 = 8.0;
pub const VENDOR2_LASER_PAD_MIL: f64 = 16.0;

/// Filled 4 mil laser via from L1 to L3 with no stub, pads on both ends
/// and 20 mil plane clearances.
pub fn laser_blind_via(pad_mil: f64) -> (ViaGeometry, StackUp) {
    let stack = reference_stackup();
    let n = stack.metal_layers.len();
    let mut pads = vec![0.0; n];
    pads[0] = pad_mil;
    pads[2] = pad_mil;
    let geom = ViaGeometry {
        drill_diameter: 4.0,
        plated_od: 4.0,
        wicking_depth: 0.0,
        pad_diameter: pads,
        antipad_diameter: vec![20.0; n],
        entry_layer: 1,
        exit_layer: 3,
        stub_span: 0,
        layer_shift: Vec::new(),
    };
    (geom, stack)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn reference_stack_is_valid() {
        let s = reference_stackup();
        s.validate().unwrap();
        assert_eq!(s.metal_layers.len(), 12);
    }

    #[test]
    fn sweep_starts_padless_and_is_increasing() {
        assert!(BOTTOM_PAD_SWEEP_MM.windows(2).all(|w| w[1] > w[0]));
        let (g, _) = reference_via();
        assert!((g.pad_diameter[11] - 0.2510 * MIL_PER_MM).abs() < 1e-12);
    }

    #[test]
    fn laser_vias_are_stubless() {
        for pad in [VENDOR1_LASER_PAD_MIL, VENDOR2_LASER_PAD_MIL] {
            let (g, s) = laser_blind_via(pad);
            let m = crate::synth::ViaModelSummary::build(&g, &s, &Default::default()).unwrap();
            assert_eq!(m.segments.len(), 2);
            assert_eq!(m.stub_start, 2);
        }
    }
}
