use std::f64::consts::PI;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use super::Waveform;
use crate::error::{Error, Result};

/// Flat-topped pulse with half-cosine edges.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PulseSpec {
    /// Full width at half maximum.
    pub width_ps: f64,
    /// 0-100% duration of each edge.
    pub edge_ps: f64,
    pub amplitude_v: f64,
}

impl Default for PulseSpec {
    fn default() -> Self {
        Self {
            width_ps: 18.0,
            edge_ps: 6.0,
            amplitude_v: 1.0,
        }
    }
}

/// Half-cosine rise over `edge`, flat top, half-cosine fall; half maximum
/// falls at `edge/2` and `width + edge/2`.
pub fn make_pulse(spec: &PulseSpec, dt_ps: f64) -> Result<Waveform> {
    if !(spec.edge_ps > 0.0) || spec.width_ps < spec.edge_ps {
        return Err(Error::InvalidParameter(format!(
            "pulse needs width >= edge > 0 (width {} ps, edge {} ps)",
            spec.width_ps, spec.edge_ps
        )));
    }
    if !(dt_ps > 0.0) || dt_ps > spec.edge_ps / 8.0 {
        return Err(Error::InvalidParameter(format!(
            "time step {dt_ps} ps too coarse for a {} ps edge (need <= edge/8)",
            spec.edge_ps
        )));
    }
    let (w, e, a) = (spec.width_ps, spec.edge_ps, spec.amplitude_v);
    let n = ((w + e) / dt_ps).ceil() as usize + 1;
    let samples = (0..n)
        .map(|i| {
            let t = i as f64 * dt_ps;
            if t < e {
                0.5 * a * (1.0 - (PI * t / e).cos())
            } else if t <= w {
                a
            } else if t < w + e {
                0.5 * a * (1.0 + (PI * (t - w) / e).cos())
            } else {
                0.0
            }
        })
        .collect();
    Ok(Waveform {
        t0_ps: 0.0,
        dt_ps,
        samples,
    })
}

/// Fourier transform of the unit-area half-sine kernel on `[0, edge]`,
/// i.e. the spectrum that turns an ideal step into a half-cosine edge.
pub fn edge_spectrum(freq_hz: f64, edge_s: f64) -> Complex64 {
    let w = 2.0 * PI * freq_hz;
    let x = w * edge_s / PI;
    let shape = if (1.0 - x).abs() < 1e-6 {
        PI / 4.0
    } else {
        (w * edge_s / 2.0).cos() / (1.0 - x * x)
    };
    Complex64::from_polar(shape, -w * edge_s / 2.0)
}
