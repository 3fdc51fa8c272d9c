//! Analytic channel elements: ideal thru, shunt capacitor, causal lossy
//! stripline and a parametric plated-through-hole via.

mod abcd;
mod via;

pub use abcd::Abcd;
pub use via::{
    synth_via, synth_via_with, Layer, LayerMaterial, SegmentSummary, StackUp, ViaGeometry,
    ViaModelOptions, ViaModelSummary, DEFAULT_K_PAD,
};

use std::f64::consts::{LN_10, PI};

use num_complex::Complex64;
use schemars::JsonSchema;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::network::SParameterNetwork;

pub const SPEED_OF_LIGHT: f64 = 299_792_458.0;
pub const EPSILON_0: f64 = 8.854_187_8128e-12;
pub const METERS_PER_MIL: f64 = 25.4e-6;
pub const DEFAULT_REFERENCE_OHMS: f64 = 50.0;

/// Ideal thru: S21 = S12 = 1, S11 = S22 = 0.
pub fn synth_thru(grid: &[f64], reference_ohms: f64) -> Result<SParameterNetwork> {
    let zero = Complex64::new(0.0, 0.0);
    let one = Complex64::new(1.0, 0.0);
    SParameterNetwork::two_port_from_fn(grid, reference_ohms, |_| [zero, one, one, zero])
}

/// Lumped shunt capacitor between the two ports and ground.
pub fn synth_shunt_capacitor(
    c_farads: f64,
    z0: f64,
    grid: &[f64],
) -> Result<SParameterNetwork> {
    if !(c_farads >= 0.0) || !c_farads.is_finite() {
        return Err(Error::InvalidParameter(format!(
            "capacitance must be non-negative, got {c_farads}"
        )));
    }
    SParameterNetwork::two_port_from_fn(grid, z0, |f| {
        let y = Complex64::new(0.0, 2.0 * PI * f * c_farads * z0);
        let den = y + 2.0;
        let s11 = -y / den;
        let s21 = Complex64::new(2.0, 0.0) / den;
        [s11, s21, s21, s11]
    })
}

/// Closed-form |S11| of a shunt capacitor.
pub fn shunt_capacitor_reflection(c_farads: f64, z0: f64, freq_hz: f64) -> f64 {
    let x = 2.0 * PI * freq_hz * c_farads * z0;
    x / (4.0 + x * x).sqrt()
}

/// Stripline description. The line is synthesized as its single-ended
/// equivalent with characteristic impedance `z_differential / 2`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, JsonSchema)]
#[serde(default, deny_unknown_fields)]
pub struct LineSpec {
    /// Meters.
    pub length: f64,
    /// Ohms.
    pub z_differential: f64,
    /// Insertion loss at `nyquist_hz`, positive dB.
    pub il_at_nyquist: f64,
    pub nyquist_hz: f64,
    /// Fraction of the Nyquist loss carried by the conductor (sqrt f) term;
    /// the rest is dielectric (linear in f).
    pub loss_partition: f64,
    /// Effective relative permittivity setting the high-frequency delay.
    pub er_effective: f64,
}

impl Default for LineSpec {
    fn default() -> Self {
        Self {
            length: 0.1,
            z_differential: 100.0,
            il_at_nyquist: 15.0,
            nyquist_hz: 28e9,
            loss_partition: 1.0 / 3.0,
            er_effective: 3.5,
        }
    }
}

impl LineSpec {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::InvalidParameter(m));
        if !(self.length >= 0.0) || !self.length.is_finite() {
            return bad(format!("line length {} must be >= 0", self.length));
        }
        if self.length == 0.0 && self.il_at_nyquist != 0.0 {
            return bad("a zero-length line cannot carry insertion loss".into());
        }
        if !(self.il_at_nyquist >= 0.0) {
            return bad(format!("insertion loss {} must be >= 0 dB", self.il_at_nyquist));
        }
        if !(0.0..=1.0).contains(&self.loss_partition) {
            return bad(format!("loss partition {} outside [0, 1]", self.loss_partition));
        }
        if !(self.z_differential > 0.0) || !(self.nyquist_hz > 0.0) || !(self.er_effective >= 1.0)
        {
            return bad("impedance, Nyquist frequency and er_effective must be positive".into());
        }
        Ok(())
    }

    /// Same line per meter (same dB/m profile) at a different length.
    pub fn with_length(&self, length: f64) -> Self {
        let il = if self.length > 0.0 {
            self.il_at_nyquist * length / self.length
        } else {
            0.0
        };
        Self {
            length,
            il_at_nyquist: il,
            ..self.clone()
        }
    }

    /// Attenuation in dB/m at `freq_hz`.
    pub fn attenuation_db_per_m(&self, freq_hz: f64) -> f64 {
        if self.length == 0.0 {
            return 0.0;
        }
        let x = freq_hz / self.nyquist_hz;
        let per_m = self.il_at_nyquist / self.length;
        per_m * (self.loss_partition * x.sqrt() + (1.0 - self.loss_partition) * x)
    }

    /// Complex propagation exponent gamma*length (nepers + j radians).
    ///
    /// Conductor term `a_c (1 + j) sqrt(f/fN)` is analytic in sqrt(s); the
    /// dielectric term `a_d f/fN` carries its Hilbert partner
    /// `-(2 a_d / pi) (f/fN) ln(f/fN)`, which vanishes at fN so that the
    /// high-frequency delay stays `length * sqrt(er_effective) / c`.
    pub fn propagation(&self, freq_hz: f64) -> Complex64 {
        let np = self.il_at_nyquist * LN_10 / 20.0;
        let a_c = self.loss_partition * np;
        let a_d = (1.0 - self.loss_partition) * np;
        let x = freq_hz / self.nyquist_hz;
        let x_ln_x = if x > 0.0 { x * x.ln() } else { 0.0 };
        let tau = self.length * self.er_effective.sqrt() / SPEED_OF_LIGHT;
        let sqrt_x = x.sqrt();
        Complex64::new(
            a_c * sqrt_x + a_d * x,
            a_c * sqrt_x - (2.0 * a_d / PI) * x_ln_x + 2.0 * PI * freq_hz * tau,
        )
    }
}

/// Causal lossy stripline referenced to `z0`.
pub fn synth_lossy_stripline(
    spec: &LineSpec,
    z0: f64,
    grid: &[f64],
) -> Result<SParameterNetwork> {
    spec.validate()?;
    let zc = spec.z_differential / 2.0;
    let gamma = (zc - z0) / (zc + z0);
    let g2 = gamma * gamma;
    SParameterNetwork::two_port_from_fn(grid, z0, |f| {
        let p = (-spec.propagation(f)).exp();
        let p2 = p * p;
        let den = Complex64::new(1.0, 0.0) - p2 * g2;
        let s11 = (Complex64::new(1.0, 0.0) - p2) * gamma / den;
        let s21 = p * (1.0 - g2) / den;
        [s11, s21, s21, s11]
    })
}

/// Finished barrel OD after copper wicking grows it outward on each side.
pub fn effective_barrel_od(plated_od_mil: f64, wicking_depth_mil: f64) -> f64 {
    plated_od_mil + 2.0 * wicking_depth_mil
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::algebra::{cascade, check_passivity};
    use crate::network::{db, linear_grid};

    #[test]
    fn zero_capacitor_is_thru() {
        let grid = linear_grid(1e9, 50e9, 11);
        let cap = synth_shunt_capacitor(0.0, 50.0, &grid).unwrap();
        assert_eq!(cap, synth_thru(&grid, 50.0).unwrap());
    }

    #[test]
    fn capacitor_reflection_100ff() {
        let cap = synth_shunt_capacitor(100e-15, 50.0, &[28e9]).unwrap();
        let s11 = db(cap.s_matrix[0][(0, 0)]);
        // x = 2*pi*28e9*1e-13*50; |S11| = x / sqrt(4 + x^2)
        let x: f64 = 2.0 * PI * 28e9 * 1e-13 * 50.0;
        let oracle = 20.0 * (x / (4.0 + x * x).sqrt()).log10();
        assert!((s11 - oracle).abs() < 1e-12);
        assert!((s11 + 7.90).abs() < 0.005, "{s11}");
    }

    #[test]
    fn capacitor_is_lossless_and_rejects_negative() {
        let grid = linear_grid(1e9, 60e9, 30);
        let cap = synth_shunt_capacitor(250e-15, 50.0, &grid).unwrap();
        for m in &cap.s_matrix {
            let p = m[(0, 0)].norm_sqr() + m[(1, 0)].norm_sqr();
            assert!((p - 1.0).abs() < 1e-14);
        }
        assert!(synth_shunt_capacitor(-1e-15, 50.0, &grid).is_err());
    }

    #[test]
    fn stripline_anchor_and_monotonic_loss() {
        let spec = LineSpec::default();
        let grid = linear_grid(0.5e9, 60e9, 120);
        let line = synth_lossy_stripline(&spec, 50.0, &grid).unwrap();
        let at_n = synth_lossy_stripline(&spec, 50.0, &[28e9]).unwrap();
        assert!((db(at_n.s_matrix[0][(1, 0)]) + 15.0).abs() < 1e-9);
        let mags: Vec<f64> = line.s21().iter().map(|z| z.norm()).collect();
        assert!(mags.windows(2).all(|w| w[1] < w[0]));
        for m in &line.s_matrix {
            assert!(m[(0, 0)].norm() < 1e-15);
        }
    }

    #[test]
    fn stripline_zero_length_is_thru() {
        let grid = linear_grid(0.0, 40e9, 9);
        let line = synth_lossy_stripline(&LineSpec::default().with_length(0.0), 50.0, &grid).unwrap();
        assert!(line.max_abs_diff(&synth_thru(&grid, 50.0).unwrap()).unwrap() < 1e-15);
    }

    #[test]
    fn mismatched_stripline_reflects_and_stays_passive() {
        let spec = LineSpec {
            z_differential: 110.0,
            ..LineSpec::default()
        };
        let grid = linear_grid(0.1e9, 50e9, 200);
        let line = synth_lossy_stripline(&spec, 50.0, &grid).unwrap();
        assert!(check_passivity(&line).passive);
        assert!(line.s11().iter().any(|z| z.norm() > 0.01));
        assert!(line.reciprocity_error() < 1e-12);
    }

    #[test]
    fn stripline_halves_cascade_to_whole() {
        let spec = LineSpec::default();
        let grid = linear_grid(0.1e9, 50e9, 50);
        let half = synth_lossy_stripline(&spec.with_length(0.05), 50.0, &grid).unwrap();
        let whole = synth_lossy_stripline(&spec, 50.0, &grid).unwrap();
        let joined = cascade(&half, &half).unwrap();
        assert!(joined.max_abs_diff(&whole).unwrap() < 1e-12);
    }

    #[test]
    fn barrel_growth() {
        assert_eq!(effective_barrel_od(8.0, 1.0), 10.0);
        assert_eq!(effective_barrel_od(8.0, 0.0), 8.0);
        assert_eq!(effective_barrel_od(8.0, 2.0), 12.0);
    }
}
