use std::f64::consts::PI;
use std::sync::Arc;

use num_complex::Complex64;
use rustfft::{Fft, FftPlanner};
use schemars::JsonSchema;
use serde::{Deserialize, Serialize};

use super::prbs::PRBS7_PERIOD;
use super::pulse::edge_spectrum;
use crate::error::{Error, Result};
use crate::network::SParameterNetwork;
use crate::touchstone::interp_trace;

pub const SYMBOL_RATE: f64 = 56e9;

/// How the two FFE taps are constrained during the search.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize, JsonSchema)]
#[serde(rename_all = "snake_case")]
pub enum TapNormalization {
    /// Main cursor fixed at 1, post-cursor swept.
    #[default]
    UnitMain,
    /// |c0| + |c1| = 1 (peak-power constrained transmitter).
    SumToOne,
}

impl std::str::FromStr for TapNormalization {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "unit_main" | "unit-main" => Ok(Self::UnitMain),
            "sum_to_one" | "sum-to-one" => Ok(Self::SumToOne),
            _ => Err(Error::InvalidParameter(format!("unknown tap normalization '{s}'"))),
        }
    }
}

/// Two-tap FIR `c0 + c1 z^-1` at one tap per UI.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EqualizerTaps {
    pub c0: f64,
    pub c1: f64,
}

impl Default for EqualizerTaps {
    fn default() -> Self {
        Self { c0: 1.0, c1: 0.0 }
    }
}

impl EqualizerTaps {
    /// Response at normalized angle `w_ui` = omega * UI.
    pub fn response(&self, w_ui: f64) -> Complex64 {
        Complex64::new(self.c0, 0.0) + Complex64::from_polar(self.c1, -w_ui)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, JsonSchema)]
#[serde(default, deny_unknown_fields)]
pub struct EyeConfig {
    pub symbol_rate_hz: f64,
    /// Phases per UI.
    pub samples_per_ui: usize,
    /// 0-100% half-cosine transition time.
    pub edge_ps: f64,
    pub amplitude_v: f64,
    pub extrapolate_dc: bool,
    pub tap_normalization: TapNormalization,
    /// Post-cursor search step and count (c1 = -i * step, i = 0..=steps).
    pub tap_step: f64,
    pub tap_steps: usize,
}

impl Default for EyeConfig {
    fn default() -> Self {
        Self {
            symbol_rate_hz: SYMBOL_RATE,
            samples_per_ui: 64,
            edge_ps: 6.0,
            amplitude_v: 1.0,
            extrapolate_dc: true,
            tap_normalization: TapNormalization::UnitMain,
            tap_step: 0.005,
            tap_steps: 120,
        }
    }
}

impl EyeConfig {
    pub fn ui_ps(&self) -> f64 {
        1e12 / self.symbol_rate_hz
    }

    fn validate(&self) -> Result<()> {
        if !(self.symbol_rate_hz > 0.0) || !(self.edge_ps > 0.0) || !(self.tap_step >= 0.0) {
            return Err(Error::InvalidParameter(
                "symbol rate and edge time must be positive, tap step non-negative".into(),
            ));
        }
        if self.samples_per_ui < 4 {
            return Err(Error::InvalidParameter("need at least 4 samples per UI".into()));
        }
        Ok(())
    }

    /// Candidate tap sets in search order.
    pub fn tap_candidates(&self) -> Vec<EqualizerTaps> {
        (0..=self.tap_steps)
            .map(|i| {
                let c1 = -(i as f64) * self.tap_step;
                let c0 = match self.tap_normalization {
                    TapNormalization::UnitMain => 1.0,
                    TapNormalization::SumToOne => 1.0 - c1.abs(),
                };
                EqualizerTaps { c0, c1 }
            })
            .collect()
    }
}

/// Harmonic frequencies `k * f0` (k = 0, 1, ...) of a periodic pattern of
/// `pattern_len` symbols, up to `f_max`.
pub fn harmonic_grid(cfg: &EyeConfig, pattern_len: usize, f_max: f64) -> Vec<f64> {
    let f0 = cfg.symbol_rate_hz / pattern_len as f64;
    let k_max = (f_max / f0 * (1.0 + 1e-12)).floor() as usize;
    (0..=k_max).map(|k| k as f64 * f0).collect()
}

/// Folded periodic eye: per-phase inner contours over one UI.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EyeDiagram {
    pub ui_ps: f64,
    pub samples_per_ui: usize,
    pub taps: EqualizerTaps,
    /// Lowest "one" at each phase.
    pub upper: Vec<f64>,
    /// Highest "zero" at each phase.
    pub lower: Vec<f64>,
    /// One period, rotated so bit n occupies samples n*P..(n+1)*P.
    pub waveform: Vec<f64>,
    pub bits: Vec<u8>,
    /// Harmonics below the sampling Nyquist limit but above the data.
    pub truncated_harmonics: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct EyeMetrics {
    pub inner_height_v: f64,
    pub inner_width_ui: f64,
}

impl EyeDiagram {
    pub fn center_phase(&self) -> usize {
        self.samples_per_ui / 2
    }

    pub fn opening(&self) -> impl Iterator<Item = f64> + '_ {
        self.upper.iter().zip(&self.lower).map(|(u, l)| u - l)
    }

    pub fn metrics(&self) -> EyeMetrics {
        let c = self.center_phase();
        let open = self.opening().filter(|&o| o > 0.0).count();
        EyeMetrics {
            inner_height_v: self.upper[c] - self.lower[c],
            inner_width_ui: open as f64 / self.samples_per_ui as f64,
        }
    }

    pub fn is_open(&self) -> bool {
        self.metrics().inner_height_v > 0.0
    }
}

/// Eye-closure penalty of `eye` against `reference` in mV*UI: the
/// phase-averaged loss of (non-negative) inner opening.
pub fn eye_closure(eye: &EyeDiagram, reference: &EyeDiagram) -> Result<f64> {
    if eye.samples_per_ui != reference.samples_per_ui
        || (eye.ui_ps - reference.ui_ps).abs() > 1e-9 * reference.ui_ps
    {
        return Err(Error::PhaseGridMismatch(eye.samples_per_ui, reference.samples_per_ui));
    }
    let p = eye.samples_per_ui as f64;
    let sum: f64 = eye
        .opening()
        .zip(reference.opening())
        .map(|(o, r)| (r.max(0.0) - o.max(0.0)).max(0.0))
        .sum();
    Ok(1000.0 * sum / p)
}

/// Channel and stimulus precomputed on the pattern's harmonic grid so that
/// eyes for many tap settings are cheap.
pub struct EyeEngine {
    cfg: EyeConfig,
    bits: Vec<u8>,
    /// Stimulus times channel per harmonic k = 0..=K.
    pattern: Vec<Complex64>,
    /// Same for a single isolated one, used for alignment.
    single: Vec<Complex64>,
    points: usize,
    truncated: usize,
    fft: Arc<dyn Fft<f64>>,
}

impl std::fmt::Debug for EyeEngine {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("EyeEngine")
            .field("bits", &self.bits.len())
            .field("harmonics", &self.pattern.len())
            .field("truncated", &self.truncated)
            .finish()
    }
}

impl EyeEngine {
    pub fn new(net: &SParameterNetwork, bits: &[u8], cfg: &EyeConfig) -> Result<Self> {
        cfg.validate()?;
        net.require_ports(2)?;
        let l = bits.len();
        if l == 0 || l % PRBS7_PERIOD != 0 {
            return Err(Error::IncompletePattern {
                len: l,
                period: PRBS7_PERIOD,
            });
        }
        if bits.iter().any(|&b| b > 1) || !bits.contains(&0) || !bits.contains(&1) {
            return Err(Error::InvalidParameter(
                "pattern must be binary and contain both symbols".into(),
            ));
        }
        let p = cfg.samples_per_ui;
        let points = l * p;
        let f0 = cfg.symbol_rate_hz / l as f64;
        let k_nyquist = points / 2 - 1;
        let k_data = (net.f_max() / f0 * (1.0 + 1e-12)).floor() as usize;
        let k_top = k_data.min(k_nyquist);
        let truncated = k_nyquist - k_top;
        if truncated > 0 {
            log::info!(
                "eye: {truncated} harmonics above {:.3} GHz dropped (no channel data)",
                net.f_max() / 1e9
            );
        }

        let mut bit_dft: Vec<Complex64> =
            bits.iter().map(|&b| Complex64::new(b as f64, 0.0)).collect();
        FftPlanner::new().plan_fft_forward(l).process(&mut bit_dft);

        let s21 = net.s21();
        let edge_s = cfg.edge_ps * 1e-12;
        let mut pattern = Vec::with_capacity(k_top + 1);
        let mut single = Vec::with_capacity(k_top + 1);
        for k in 0..=k_top {
            let f = k as f64 * f0;
            let x = 2.0 * PI * k as f64 / l as f64;
            // Rectangular symbol of width UI over a period of L UI.
            let rect = if k == 0 {
                Complex64::new(1.0, 0.0)
            } else {
                (Complex64::new(1.0, 0.0) - Complex64::from_polar(1.0, -x)) / Complex64::new(0.0, x)
            };
            let h = interp_trace(&net.frequencies_hz, &s21, f, cfg.extrapolate_dc)?;
            let common = rect * edge_spectrum(f, edge_s) * h * (cfg.amplitude_v / l as f64);
            pattern.push(common * bit_dft[k % l]);
            single.push(common);
        }

        let fft = FftPlanner::new().plan_fft_inverse(points);
        Ok(Self {
            cfg: cfg.clone(),
            bits: bits.to_vec(),
            pattern,
            single,
            points,
            truncated,
            fft,
        })
    }

    pub fn config(&self) -> &EyeConfig {
        &self.cfg
    }

    pub fn truncated_harmonics(&self) -> usize {
        self.truncated
    }

    /// Real periodic waveform from one-sided Fourier coefficients.
    fn synthesize(&self, coeffs: &[Complex64], taps: &EqualizerTaps) -> Vec<f64> {
        let n = self.points;
        let l = self.bits.len() as f64;
        let mut buf = vec![Complex64::new(0.0, 0.0); n];
        for (k, c) in coeffs.iter().enumerate() {
            let v = c * taps.response(2.0 * PI * k as f64 / l);
            if k == 0 {
                buf[0] = Complex64::new(v.re, 0.0);
            } else {
                buf[k] = v;
                buf[n - k] = v.conj();
            }
        }
        self.fft.process(&mut buf);
        buf.into_iter().map(|z| z.re).collect()
    }

    /// Index of the single-bit response center: midpoint of the half-maximum
    /// crossings around its peak.
    fn alignment_index(pulse: &[f64]) -> usize {
        let n = pulse.len();
        let (peak_idx, &peak) = pulse
            .iter()
            .enumerate()
            .max_by(|a, b| a.1.total_cmp(b.1))
            .expect("non-empty");
        if peak <= 0.0 {
            return peak_idx;
        }
        let half = peak / 2.0;
        let at = |off: isize| pulse[(peak_idx as isize + off).rem_euclid(n as isize) as usize];
        let limit = n as isize / 2;
        let crossing = |dir: isize| {
            let mut off = 0isize;
            while off.abs() < limit && at(off + dir) >= half {
                off += dir;
            }
            let (inside, outside) = (at(off), at(off + dir));
            off as f64 + dir as f64 * (inside - half) / (inside - outside)
        };
        let mid = 0.5 * (crossing(-1) + crossing(1));
        (peak_idx as isize + mid.round() as isize).rem_euclid(n as isize) as usize
    }

    pub fn eye(&self, taps: EqualizerTaps) -> EyeDiagram {
        let p = self.cfg.samples_per_ui;
        let n = self.points;
        let raw = self.synthesize(&self.pattern, &taps);
        let pulse = self.synthesize(&self.single, &taps);
        let center = Self::alignment_index(&pulse);
        let offset = (center + n - p / 2) % n;
        let waveform: Vec<f64> = (0..n).map(|i| raw[(offset + i) % n]).collect();

        let mut upper = vec![f64::INFINITY; p];
        let mut lower = vec![f64::NEG_INFINITY; p];
        for (bit, window) in self.bits.iter().zip(waveform.chunks_exact(p)) {
            for (j, &v) in window.iter().enumerate() {
                if *bit == 1 {
                    upper[j] = upper[j].min(v);
                } else {
                    lower[j] = lower[j].max(v);
                }
            }
        }
        EyeDiagram {
            ui_ps: self.cfg.ui_ps(),
            samples_per_ui: p,
            taps,
            upper,
            lower,
            waveform,
            bits: self.bits.clone(),
            truncated_harmonics: self.truncated,
        }
    }
}

/// Eye of `net` driven by the periodic pattern `bits` through `taps`.
pub fn synthesize_eye(
    net: &SParameterNetwork,
    bits: &[u8],
    cfg: &EyeConfig,
    taps: EqualizerTaps,
) -> Result<EyeDiagram> {
    Ok(EyeEngine::new(net, bits, cfg)?.eye(taps))
}

#[derive(Debug, Clone, Serialize)]
pub struct FfeResult {
    pub taps: EqualizerTaps,
    pub eye: EyeDiagram,
    pub unequalized_height_v: f64,
    /// Best achievable center height is not positive.
    pub closed: bool,
}

/// Grid search over the post-cursor tap for the largest center inner
/// height; the first maximum in search order wins.
pub fn optimize_2tap_ffe(engine: &EyeEngine) -> FfeResult {
    let mut best: Option<(f64, EyeDiagram)> = None;
    let mut unequalized = f64::NAN;
    for taps in engine.config().tap_candidates() {
        let eye = engine.eye(taps);
        let h = eye.metrics().inner_height_v;
        if taps.c1 == 0.0 {
            unequalized = h;
        }
        if best.as_ref().map_or(true, |(b, _)| h > *b) {
            best = Some((h, eye));
        }
    }
    let (height, eye) = best.expect("at least one candidate");
    if height <= 0.0 {
        log::warn!("eye remains closed after FFE (best height {height:.4} V)");
    }
    FfeResult {
        taps: eye.taps,
        unequalized_height_v: unequalized,
        closed: height <= 0.0,
        eye,
    }
}
