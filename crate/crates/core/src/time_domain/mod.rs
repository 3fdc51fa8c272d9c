//! Time-domain analysis: pulse and reflected-pulse responses, TDR, PRBS
//! stimulus, eye synthesis, two-tap FFE and the eye-closure metric.

mod eye;
mod prbs;
mod pulse;
mod response;

pub use eye::{
    eye_closure, harmonic_grid, optimize_2tap_ffe, synthesize_eye, EqualizerTaps, EyeConfig,
    EyeDiagram, EyeEngine, EyeMetrics, FfeResult, TapNormalization, SYMBOL_RATE,
};
pub use prbs::{prbs7, PRBS7_PERIOD};
pub use pulse::{edge_spectrum, make_pulse, PulseSpec};
pub use response::{reflected_response, tdr, through_response, ResponseOptions};

use serde::Serialize;

/// Uniformly sampled signal.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Waveform {
    pub t0_ps: f64,
    pub dt_ps: f64,
    pub samples: Vec<f64>,
}

impl Waveform {
    pub fn time_ps(&self, i: usize) -> f64 {
        self.t0_ps + self.dt_ps * i as f64
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn peak(&self) -> f64 {
        self.samples.iter().copied().fold(f64::NEG_INFINITY, f64::max)
    }

    /// Largest |v|.
    pub fn peak_abs(&self) -> f64 {
        self.samples.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    /// Sum of v^2 dt in V^2 ps.
    pub fn energy(&self) -> f64 {
        self.samples.iter().map(|v| v * v).sum::<f64>() * self.dt_ps
    }

    /// Rectangle-rule integral in V ps.
    pub fn integral(&self) -> f64 {
        self.samples.iter().sum::<f64>() * self.dt_ps
    }

    /// Full width at half maximum using linear interpolation of the
    /// crossings.
    pub fn fwhm_ps(&self) -> f64 {
        let half = self.peak() / 2.0;
        let s = &self.samples;
        let crossing = |i: usize| {
            let (a, b) = (s[i], s[i + 1]);
            self.time_ps(i) + self.dt_ps * (half - a) / (b - a)
        };
        let rise = (0..s.len() - 1).find(|&i| s[i] < half && s[i + 1] >= half);
        let fall = (0..s.len() - 1).rev().find(|&i| s[i] >= half && s[i + 1] < half);
        match (rise, fall) {
            (Some(r), Some(f)) => crossing(f) - crossing(r),
            _ => f64::NAN,
        }
    }
}
