//! Broadband reflected voltage (BRV): a straight line laid across the
//! return-loss humps, read off at the Nyquist frequency.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::network::SParameterNetwork;

/// Floor applied to `20 log10 |S11|` for zero magnitudes.
const DB_FLOOR: f64 = -400.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BrvMethod {
    LineFit,
    EnvelopeFallback,
}

/// How the line through the humps is chosen.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum HumpLine {
    /// Least-squares fit through every hump.
    #[default]
    LeastSquares,
    /// Upper convex hull of the humps; the edge spanning Nyquist (or the
    /// nearest end edge) is used.
    UpperTangent,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct BrvOptions {
    pub prominence_db: f64,
    /// Defaults to (2 GHz, 1.25 * Nyquist).
    pub band_hz: Option<(f64, f64)>,
    pub line: HumpLine,
}

impl Default for BrvOptions {
    fn default() -> Self {
        Self {
            prominence_db: 3.0,
            band_hz: None,
            line: HumpLine::LeastSquares,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BrvResult {
    pub hump_frequencies_hz: Vec<f64>,
    pub hump_levels_db: Vec<f64>,
    pub line_slope_db_per_hz: f64,
    pub line_intercept_db: f64,
    pub brv_db_at_nyquist: f64,
    pub method: BrvMethod,
}

impl BrvResult {
    /// Fitted line at `freq_hz` (unclamped).
    pub fn line_at(&self, freq_hz: f64) -> f64 {
        self.line_intercept_db + self.line_slope_db_per_hz * freq_hz
    }
}

fn to_db(mag: f64) -> f64 {
    if mag > 0.0 {
        (20.0 * mag.log10()).max(DB_FLOOR)
    } else {
        DB_FLOOR
    }
}

/// Indices of interior local maxima (plateaus reported at their middle)
/// with their topographic prominence.
pub(crate) fn peaks_with_prominence(y: &[f64]) -> Vec<(usize, f64)> {
    let n = y.len();
    let mut out = Vec::new();
    let mut i = 1;
    while i + 1 < n {
        if y[i - 1] < y[i] {
            let mut j = i;
            while j + 1 < n && y[j + 1] == y[i] {
                j += 1;
            }
            if j + 1 < n && y[j + 1] < y[i] {
                let peak = (i + j) / 2;
                let mut left_min = y[i];
                for k in (0..i).rev() {
                    if y[k] > y[i] {
                        break;
                    }
                    left_min = left_min.min(y[k]);
                }
                let mut right_min = y[i];
                for &v in &y[j + 1..] {
                    if v > y[i] {
                        break;
                    }
                    right_min = right_min.min(v);
                }
                out.push((peak, y[i] - left_min.max(right_min)));
            }
            i = j + 1;
        } else {
            i += 1;
        }
    }
    out
}

fn least_squares(x: &[f64], y: &[f64]) -> (f64, f64) {
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum();
    let sxx: f64 = x.iter().map(|a| (a - mx) * (a - mx)).sum();
    let slope = sxy / sxx;
    (slope, my - slope * mx)
}

fn upper_tangent(x: &[f64], y: &[f64], at: f64) -> (f64, f64) {
    // Monotone-chain upper hull; x is increasing.
    let mut hull: Vec<usize> = Vec::new();
    for i in 0..x.len() {
        while hull.len() >= 2 {
            let (a, b) = (hull[hull.len() - 2], hull[hull.len() - 1]);
            let cross = (x[b] - x[a]) * (y[i] - y[a]) - (y[b] - y[a]) * (x[i] - x[a]);
            if cross >= 0.0 {
                hull.pop();
            } else {
                break;
            }
        }
        hull.push(i);
    }
    let edge = hull
        .windows(2)
        .position(|w| x[w[1]] >= at)
        .unwrap_or(hull.len() - 2);
    let (a, b) = (hull[edge], hull[edge + 1]);
    let slope = (y[b] - y[a]) / (x[b] - x[a]);
    (slope, y[a] - slope * x[a])
}

fn interp(x: &[f64], y: &[f64], at: f64) -> f64 {
    let i = x.partition_point(|&v| v < at);
    if i == 0 {
        return y[0];
    }
    if i == x.len() {
        return y[x.len() - 1];
    }
    if x[i] == at {
        return y[i];
    }
    let t = (at - x[i - 1]) / (x[i] - x[i - 1]);
    y[i - 1] + (y[i] - y[i - 1]) * t
}

/// BRV of a reflection magnitude curve (linear |S11| on an increasing grid).
pub fn extract_brv(
    freqs_hz: &[f64],
    reflection: &[f64],
    nyquist_hz: f64,
    opts: &BrvOptions,
) -> Result<BrvResult> {
    if freqs_hz.len() != reflection.len() {
        return Err(Error::InvalidParameter(
            "frequency and reflection lengths differ".into(),
        ));
    }
    let (lo, hi) = opts.band_hz.unwrap_or((2e9, 1.25 * nyquist_hz));
    let (Some(&f_first), Some(&f_last)) = (freqs_hz.first(), freqs_hz.last()) else {
        return Err(Error::EmptyBand("no samples in the analysis band".into()));
    };
    if !(lo < hi) || lo < f_first || hi > f_last || nyquist_hz < f_first || nyquist_hz > f_last {
        return Err(Error::InvalidParameter(format!(
            "band {lo}..{hi} Hz and Nyquist {nyquist_hz} Hz must lie within data {f_first}..{f_last} Hz"
        )));
    }
    let db: Vec<f64> = reflection.iter().map(|&m| to_db(m)).collect();
    let start = freqs_hz.partition_point(|&f| f < lo);
    let end = freqs_hz.partition_point(|&f| f <= hi);
    if end <= start {
        return Err(Error::EmptyBand("no samples in the analysis band".into()));
    }
    let band_f = &freqs_hz[start..end];
    let band_db = &db[start..end];
    let humps: Vec<usize> = peaks_with_prominence(band_db)
        .into_iter()
        .filter(|&(_, p)| p >= opts.prominence_db)
        .map(|(i, _)| i)
        .collect();
    let hump_f: Vec<f64> = humps.iter().map(|&i| band_f[i]).collect();
    let hump_db: Vec<f64> = humps.iter().map(|&i| band_db[i]).collect();

    if humps.len() < 2 {
        let level = interp(freqs_hz, &db, nyquist_hz).min(0.0);
        return Ok(BrvResult {
            hump_frequencies_hz: hump_f,
            hump_levels_db: hump_db,
            line_slope_db_per_hz: 0.0,
            line_intercept_db: level,
            brv_db_at_nyquist: level,
            method: BrvMethod::EnvelopeFallback,
        });
    }
    let (slope, intercept) = match opts.line {
        HumpLine::LeastSquares => least_squares(&hump_f, &hump_db),
        HumpLine::UpperTangent => upper_tangent(&hump_f, &hump_db, nyquist_hz),
    };
    Ok(BrvResult {
        brv_db_at_nyquist: (intercept + slope * nyquist_hz).min(0.0),
        hump_frequencies_hz: hump_f,
        hump_levels_db: hump_db,
        line_slope_db_per_hz: slope,
        line_intercept_db: intercept,
        method: BrvMethod::LineFit,
    })
}

/// BRV of port-1 reflection of `net`.
pub fn network_brv(net: &SParameterNetwork, nyquist_hz: f64, opts: &BrvOptions) -> Result<BrvResult> {
    let mag: Vec<f64> = net.s11().iter().map(|z| z.norm()).collect();
    extract_brv(&net.frequencies_hz, &mag, nyquist_hz, opts)
}

/// Shunt capacitance whose reflection at Nyquist equals `brv_db`.
pub fn match_capacitor_to_brv(brv_db: f64, nyquist_hz: f64, z0: f64) -> Result<f64> {
    if !(brv_db < 0.0) {
        return Err(Error::InvalidParameter(format!(
            "BRV {brv_db} dB must be below 0 dB for a passive shunt capacitor"
        )));
    }
    if !(nyquist_hz > 0.0) || !(z0 > 0.0) {
        return Err(Error::InvalidParameter("Nyquist frequency and z0 must be positive".into()));
    }
    let r = 10f64.powf(brv_db / 20.0);
    let x = 2.0 * r / (1.0 - r * r).sqrt();
    Ok(x / (2.0 * PI * nyquist_hz * z0))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::network::linear_grid;
    use crate::synth::{shunt_capacitor_reflection, synth_shunt_capacitor};

    fn hump_curve(f: f64) -> f64 {
        // Two bumps on a steep floor; peaks at 10 and 20 GHz.
        let g = |c: f64, level: f64| level - 0.5 * ((f - c) / 1e9).powi(2);
        10f64.powf(g(10e9, -20.0).max(g(20e9, -14.0)).max(-60.0) / 20.0)
    }

    #[test]
    fn two_hump_line() {
        let grid = linear_grid(1e9, 40e9, 3901);
        let mag: Vec<f64> = grid.iter().map(|&f| hump_curve(f)).collect();
        let r = extract_brv(&grid, &mag, 28e9, &BrvOptions::default()).unwrap();
        assert_eq!(r.method, BrvMethod::LineFit);
        assert_eq!(r.hump_frequencies_hz.len(), 2);
        assert!((r.line_slope_db_per_hz * 1e9 - 0.6).abs() < 1e-9);
        assert!((r.brv_db_at_nyquist + 9.2).abs() < 1e-9);
    }

    #[test]
    fn capacitor_falls_back() {
        let grid = linear_grid(1e9, 40e9, 40);
        let net = synth_shunt_capacitor(100e-15, 50.0, &grid).unwrap();
        let r = network_brv(&net, 28e9, &BrvOptions::default()).unwrap();
        assert_eq!(r.method, BrvMethod::EnvelopeFallback);
        let expected = 20.0 * shunt_capacitor_reflection(100e-15, 50.0, 28e9).log10();
        assert!((r.brv_db_at_nyquist - expected).abs() < 1e-12);
        assert!((r.brv_db_at_nyquist + 7.90).abs() < 0.01);
    }

    #[test]
    fn flat_curve_falls_back() {
        let grid = linear_grid(1e9, 40e9, 40);
        let mag = vec![10f64.powf(-1.5); grid.len()];
        let r = extract_brv(&grid, &mag, 28e9, &BrvOptions::default()).unwrap();
        assert_eq!(r.method, BrvMethod::EnvelopeFallback);
        assert!((r.brv_db_at_nyquist + 30.0).abs() < 1e-12);
    }

    #[test]
    fn match_minus_ten_db() {
        let c = match_capacitor_to_brv(-10.0, 28e9, 50.0).unwrap();
        assert!((c - 75.8e-15).abs() < 0.05e-15);
        let back = 20.0 * shunt_capacitor_reflection(c, 50.0, 28e9).log10();
        assert!((back + 10.0).abs() < 1e-9);
        assert_eq!(match_capacitor_to_brv(f64::NEG_INFINITY, 28e9, 50.0).unwrap(), 0.0);
        assert!(match_capacitor_to_brv(0.0, 28e9, 50.0).is_err());
    }

    #[test]
    fn prominence_matches_hand_computation() {
        let y = [0.0, 5.0, 1.0, 4.0, 2.0, 6.0, 0.0];
        let p = peaks_with_prominence(&y);
        assert_eq!(p, vec![(1, 4.0), (3, 2.0), (5, 6.0)]);
        let plateau = [0.0, 3.0, 3.0, 3.0, 1.0];
        assert_eq!(peaks_with_prominence(&plateau), vec![(2, 2.0)]);
    }

    #[test]
    fn upper_tangent_lies_above_humps() {
        let x = [10e9, 15e9, 20e9, 25e9];
        let y = [-20.0, -19.0, -14.0, -16.0];
        let (m, b) = upper_tangent(&x, &y, 28e9);
        for (xi, yi) in x.iter().zip(&y) {
            assert!(m * xi + b >= yi - 1e-9);
        }
    }

    #[test]
    fn band_outside_data_rejected() {
        let grid = linear_grid(1e9, 20e9, 20);
        let mag = vec![0.1; 20];
        assert!(extract_brv(&grid, &mag, 28e9, &BrvOptions::default()).is_err());
    }
}
