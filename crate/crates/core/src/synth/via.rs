//! Quasi-static plated-through-hole via.
//!
//! The barrel between two adjacent metal layers is a coaxial TEM section
//! whose outer conductor is the plane clearance:
//!
//! ```text
//! Z   = 60 / sqrt(er_inplane) * ln(r_clear / r_barrel)
//! tau = span * sqrt(er_outofplane) / c
//! ```
//!
//! `r_barrel` is half the wicking-grown barrel OD and `r_clear` is the mean
//! clearance radius of the two bounding metal layers, each reduced by that
//! layer's shift magnitude. A pad on a metal layer adds a shunt capacitance
//! `k_pad * er_outofplane * eps0 * pi * (D_pad^2 - D_drill^2) / (4 g)` with
//! `g` the dielectric gap to the nearest plane. The barrel below the exit
//! layer hangs at the exit node as an open-circuited stub. Materials are
//! lossless.

use std::f64::consts::PI;

use num_complex::Complex64;
use schemars::JsonSchema;
use serde::{Deserialize, Serialize};

use super::abcd::Abcd;
use super::{effective_barrel_od, DEFAULT_REFERENCE_OHMS, EPSILON_0, METERS_PER_MIL, SPEED_OF_LIGHT};
use crate::error::{Error, Result};
use crate::network::SParameterNetwork;

pub const DEFAULT_K_PAD: f64 = 1.5;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, JsonSchema)]
#[serde(rename_all = "snake_case")]
pub enum LayerMaterial {
    Dielectric,
    /// Routing copper; the via has a clearance here unless it connects.
    Signal,
    /// Reference plane.
    Plane,
}

impl LayerMaterial {
    pub fn is_metal(self) -> bool {
        !matches!(self, Self::Dielectric)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, JsonSchema)]
#[serde(deny_unknown_fields)]
pub struct Layer {
    pub name: String,
    /// mil
    pub thickness: f64,
    pub material: LayerMaterial,
}

/// Board cross-section, top to bottom.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, JsonSchema)]
#[serde(deny_unknown_fields)]
pub struct StackUp {
    pub layers: Vec<Layer>,
    pub er_inplane: f64,
    pub er_outofplane: f64,
    /// Indices into `layers` of every copper layer, in order.
    pub metal_layers: Vec<usize>,
}

impl StackUp {
    pub fn validate(&self) -> Result<()> {
        if self.layers.len() < 2 {
            return Err(Error::Geometry("stack-up needs at least two layers".into()));
        }
        if let Some(l) = self.layers.iter().find(|l| !(l.thickness > 0.0)) {
            return Err(Error::Geometry(format!(
                "layer {} has non-positive thickness {}",
                l.name, l.thickness
            )));
        }
        if !(self.er_inplane > 1.0) || !(self.er_outofplane > 1.0) {
            return Err(Error::Geometry("relative permittivities must exceed 1".into()));
        }
        let metals: Vec<usize> = self
            .layers
            .iter()
            .enumerate()
            .filter(|(_, l)| l.material.is_metal())
            .map(|(i, _)| i)
            .collect();
        if metals != self.metal_layers {
            return Err(Error::Geometry(format!(
                "metal_layers {:?} does not match copper layers {:?}",
                self.metal_layers, metals
            )));
        }
        if metals.len() < 2 {
            return Err(Error::Geometry("stack-up needs at least two metal layers".into()));
        }
        Ok(())
    }

    fn metal(&self, ordinal: usize) -> &Layer {
        &self.layers[self.metal_layers[ordinal]]
    }

    /// Vertical span (mil) attributed to the barrel section between metal
    /// ordinals `m` and `m + 1`: the layers in between plus half of each
    /// bounding copper thickness.
    fn section_length_mil(&self, m: usize) -> f64 {
        let (a, b) = (self.metal_layers[m], self.metal_layers[m + 1]);
        let inner: f64 = self.layers[a + 1..b].iter().map(|l| l.thickness).sum();
        inner + 0.5 * (self.layers[a].thickness + self.layers[b].thickness)
    }

    /// Distance (mil) from metal ordinal `m` to the nearest plane layer.
    fn gap_to_plane_mil(&self, m: usize) -> Option<f64> {
        let li = self.metal_layers[m];
        let up = (0..li)
            .rev()
            .find(|&j| self.layers[j].material == LayerMaterial::Plane)
            .map(|j| self.layers[j + 1..li].iter().map(|l| l.thickness).sum::<f64>());
        let down = (li + 1..self.layers.len())
            .find(|&j| self.layers[j].material == LayerMaterial::Plane)
            .map(|j| self.layers[li + 1..j].iter().map(|l| l.thickness).sum::<f64>());
        match (up, down) {
            (Some(u), Some(d)) => Some(u.min(d)),
            (a, b) => a.or(b),
        }
    }
}

/// Physical via description. Dimensions in mil. Per-layer vectors are
/// indexed by metal-layer ordinal (top copper first); layer numbers in
/// `entry_layer` / `exit_layer` are 1-based metal layer numbers.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, JsonSchema)]
#[serde(deny_unknown_fields)]
pub struct ViaGeometry {
    pub drill_diameter: f64,
    /// Finished barrel OD before wicking.
    pub plated_od: f64,
    /// Wicking penetration per side.
    #[serde(default)]
    pub wicking_depth: f64,
    /// 0 = no pad on that layer.
    pub pad_diameter: Vec<f64>,
    /// Copper clearance diameter on each metal layer.
    pub antipad_diameter: Vec<f64>,
    pub entry_layer: usize,
    pub exit_layer: usize,
    /// Metal layers the barrel continues past the exit layer.
    #[serde(default)]
    pub stub_span: usize,
    /// (dx, dy) offset of each metal layer from the drill axis; empty means
    /// perfectly registered.
    #[serde(default)]
    pub layer_shift: Vec<[f64; 2]>,
}

impl ViaGeometry {
    pub fn barrel_od(&self) -> f64 {
        effective_barrel_od(self.plated_od, self.wicking_depth)
    }

    pub fn shift_magnitude(&self, ordinal: usize) -> f64 {
        self.layer_shift
            .get(ordinal)
            .map(|[dx, dy]| dx.hypot(*dy))
            .unwrap_or(0.0)
    }

    /// Applies one rigid (dx, dy) offset to every metal layer.
    pub fn set_rigid_shift(&mut self, metal_count: usize, dx: f64, dy: f64) {
        self.layer_shift = vec![[dx, dy]; metal_count];
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, JsonSchema)]
#[serde(default, deny_unknown_fields)]
pub struct ViaModelOptions {
    /// Pad fringing multiplier.
    pub k_pad: f64,
    pub reference_ohms: f64,
}

impl Default for ViaModelOptions {
    fn default() -> Self {
        Self {
            k_pad: DEFAULT_K_PAD,
            reference_ohms: DEFAULT_REFERENCE_OHMS,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SegmentSummary {
    /// 1-based metal layer numbers bounding the section.
    pub from_layer: usize,
    pub to_layer: usize,
    pub r_clear_mil: f64,
    pub impedance_ohm: f64,
    pub delay_s: f64,
}

/// Resolved element values of the via model.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ViaModelSummary {
    pub barrel_od_mil: f64,
    /// Sections from the entry layer down to the stub end.
    pub segments: Vec<SegmentSummary>,
    /// Pad capacitance (F) per metal layer from entry to stub end.
    pub pad_capacitance_f: Vec<f64>,
    /// Index into `segments` of the first stub section.
    pub stub_start: usize,
}

impl ViaModelSummary {
    pub fn build(geom: &ViaGeometry, stack: &StackUp, opts: &ViaModelOptions) -> Result<Self> {
        stack.validate()?;
        let n_metal = stack.metal_layers.len();
        let g = |m: String| Err(Error::Geometry(m));
        if geom.pad_diameter.len() != n_metal || geom.antipad_diameter.len() != n_metal {
            return g(format!(
                "pad/antipad lists need {n_metal} entries (one per metal layer)"
            ));
        }
        if !geom.layer_shift.is_empty() && geom.layer_shift.len() != n_metal {
            return g(format!("layer_shift needs 0 or {n_metal} entries"));
        }
        if !(geom.drill_diameter > 0.0) || geom.plated_od < geom.drill_diameter {
            return g(format!(
                "plated OD {} must be >= drill {} > 0",
                geom.plated_od, geom.drill_diameter
            ));
        }
        if !(geom.wicking_depth >= 0.0) {
            return g("wicking depth must be >= 0".into());
        }
        if let Some(p) = geom
            .pad_diameter
            .iter()
            .find(|&&p| p != 0.0 && p < geom.drill_diameter)
        {
            return g(format!("pad diameter {p} smaller than drill {}", geom.drill_diameter));
        }
        if geom.entry_layer < 1 || geom.exit_layer <= geom.entry_layer {
            return g(format!(
                "entry layer {} must be above exit layer {}",
                geom.entry_layer, geom.exit_layer
            ));
        }
        let entry = geom.entry_layer - 1;
        let exit = geom.exit_layer - 1;
        let bottom = exit + geom.stub_span;
        if bottom >= n_metal {
            return g(format!(
                "stub reaches metal layer {} but the stack has {n_metal}",
                bottom + 1
            ));
        }
        if !(opts.k_pad >= 0.0) || !(opts.reference_ohms > 0.0) {
            return g("k_pad must be >= 0 and reference impedance > 0".into());
        }

        let r_barrel = geom.barrel_od() / 2.0;
        let mut r_clear = Vec::with_capacity(bottom - entry + 1);
        for m in entry..=bottom {
            let r = geom.antipad_diameter[m] / 2.0 - geom.shift_magnitude(m);
            if r <= r_barrel {
                return Err(Error::BarrelTouchesPlane {
                    layer: stack.metal(m).name.clone(),
                    clear_mil: r,
                    barrel_mil: r_barrel,
                });
            }
            r_clear.push(r);
        }

        let z_scale = 60.0 / stack.er_inplane.sqrt();
        let segments = (entry..bottom)
            .map(|m| {
                let rc = 0.5 * (r_clear[m - entry] + r_clear[m + 1 - entry]);
                SegmentSummary {
                    from_layer: m + 1,
                    to_layer: m + 2,
                    r_clear_mil: rc,
                    impedance_ohm: z_scale * (rc / r_barrel).ln(),
                    delay_s: stack.section_length_mil(m) * METERS_PER_MIL
                        * stack.er_outofplane.sqrt()
                        / SPEED_OF_LIGHT,
                }
            })
            .collect();

        let mut pad_capacitance_f = Vec::with_capacity(bottom - entry + 1);
        for m in entry..=bottom {
            let d_pad = geom.pad_diameter[m];
            if d_pad == 0.0 {
                pad_capacitance_f.push(0.0);
                continue;
            }
            let gap = stack.gap_to_plane_mil(m).ok_or_else(|| {
                Error::Geometry("padded layer has no reference plane in the stack".into())
            })?;
            let area = PI * (d_pad * d_pad - geom.drill_diameter * geom.drill_diameter) / 4.0;
            pad_capacitance_f.push(
                opts.k_pad * stack.er_outofplane * EPSILON_0 * area * METERS_PER_MIL / gap,
            );
        }

        Ok(Self {
            barrel_od_mil: geom.barrel_od(),
            segments,
            pad_capacitance_f,
            stub_start: exit - entry,
        })
    }

    /// Chain matrix of the through path at `freq_hz`.
    pub fn abcd(&self, freq_hz: f64) -> Abcd {
        let w = 2.0 * PI * freq_hz;
        let jwc = |c: f64| Complex64::new(0.0, w * c);
        let section = |s: &SegmentSummary| Abcd::line(s.impedance_ohm, w * s.delay_s);

        let exit = self.stub_start;
        let y_stub = if self.segments.len() > exit {
            let mut y = jwc(*self.pad_capacitance_f.last().expect("non-empty"));
            for k in (exit..self.segments.len()).rev() {
                y = section(&self.segments[k]).input_admittance(y);
                if k > exit {
                    y += jwc(self.pad_capacitance_f[k]);
                }
            }
            y
        } else {
            Complex64::new(0.0, 0.0)
        };

        let mut chain = Abcd::identity();
        for k in 0..exit {
            chain = chain
                .then(&Abcd::shunt(jwc(self.pad_capacitance_f[k])))
                .then(&section(&self.segments[k]));
        }
        chain.then(&Abcd::shunt(jwc(self.pad_capacitance_f[exit]) + y_stub))
    }
}

pub fn synth_via_with(
    geom: &ViaGeometry,
    stack: &StackUp,
    grid: &[f64],
    opts: &ViaModelOptions,
) -> Result<SParameterNetwork> {
    let model = ViaModelSummary::build(geom, stack, opts)?;
    let mats = grid
        .iter()
        .map(|&f| model.abcd(f).to_s(opts.reference_ohms))
        .collect();
    SParameterNetwork::new(2, grid.to_vec(), mats, opts.reference_ohms)
}

pub fn synth_via(geom: &ViaGeometry, stack: &StackUp, grid: &[f64]) -> Result<SParameterNetwork> {
    synth_via_with(geom, stack, grid, &ViaModelOptions::default())
}
