use num_complex::Complex64;
use rustfft::FftPlanner;
use serde::{Deserialize, Serialize};

use super::pulse::edge_spectrum;
use super::Waveform;
use crate::error::{Error, Result};
use crate::network::SParameterNetwork;
use crate::touchstone::interp_trace;

/// Fraction of pulse energy that must lie below the network's f_max.
const BANDWIDTH_ENERGY_FRACTION: f64 = 0.99;
const RHO_CLAMP: f64 = 0.999;
const TDR_LEAD_RISE_TIMES: f64 = 5.0;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ResponseOptions {
    /// Minimum record (period) length; also bounds the visible settling.
    pub record_ps: f64,
    /// Fill 0..f_min with S(0) = Re(S(f_min)) and a linear ramp.
    pub extrapolate_dc: bool,
}

impl Default for ResponseOptions {
    fn default() -> Self {
        Self {
            record_ps: 2000.0,
            extrapolate_dc: true,
        }
    }
}

fn record_points(record_ps: f64, dt_ps: f64, min_len: usize) -> usize {
    ((record_ps / dt_ps).ceil() as usize).max(2 * min_len).max(16).next_power_of_two()
}

/// Frequency of the smallest one-sided band holding `fraction` of the
/// spectrum's energy.
fn energy_bandwidth(spectrum: &[Complex64], df: f64, fraction: f64) -> f64 {
    let half = spectrum.len() / 2;
    let energy: Vec<f64> = spectrum[..=half].iter().map(|z| z.norm_sqr()).collect();
    let total: f64 = energy.iter().sum();
    if total == 0.0 {
        return 0.0;
    }
    let mut acc = 0.0;
    for (k, e) in energy.iter().enumerate() {
        acc += e;
        if acc >= fraction * total {
            return k as f64 * df;
        }
    }
    half as f64 * df
}

/// Multiplies the spectrum of `spectrum` (bins 0..N, dt-spaced record) by
/// `h(f)` on the non-negative bins up to `f_max`, zeroes the rest, restores
/// Hermitian symmetry and returns the real inverse transform.
fn apply_response<F>(spectrum: &mut [Complex64], dt_s: f64, f_max: f64, mut h: F) -> Result<Vec<f64>>
where
    F: FnMut(f64) -> Result<Complex64>,
{
    let n = spectrum.len();
    let df = 1.0 / (n as f64 * dt_s);
    for k in 0..=n / 2 {
        let f = k as f64 * df;
        let v = if f <= f_max { spectrum[k] * h(f)? } else { Complex64::new(0.0, 0.0) };
        spectrum[k] = v;
        if k > 0 && k < n - k {
            spectrum[n - k] = v.conj();
        }
    }
    spectrum[0].im = 0.0;
    if n % 2 == 0 {
        spectrum[n / 2].im = 0.0;
    }
    FftPlanner::new().plan_fft_inverse(n).process(spectrum);
    Ok(spectrum.iter().map(|z| z.re / n as f64).collect())
}

fn filter_waveform(
    input: &Waveform,
    net: &SParameterNetwork,
    row: usize,
    col: usize,
    opts: &ResponseOptions,
) -> Result<Waveform> {
    if input.is_empty() {
        return Err(Error::InvalidParameter("empty input waveform".into()));
    }
    let dt_s = input.dt_ps * 1e-12;
    let n = record_points(opts.record_ps, input.dt_ps, input.len());
    let mut spec: Vec<Complex64> = input
        .samples
        .iter()
        .map(|&v| Complex64::new(v, 0.0))
        .chain(std::iter::repeat(Complex64::new(0.0, 0.0)))
        .take(n)
        .collect();
    FftPlanner::new().plan_fft_forward(n).process(&mut spec);

    let df = 1.0 / (n as f64 * dt_s);
    let required = energy_bandwidth(&spec, df, BANDWIDTH_ENERGY_FRACTION);
    if net.f_max() < required {
        return Err(Error::Bandwidth {
            available_hz: net.f_max(),
            required_hz: required,
        });
    }

    let trace = net.trace(row, col);
    let samples = apply_response(&mut spec, dt_s, net.f_max(), |f| {
        interp_trace(&net.frequencies_hz, &trace, f, opts.extrapolate_dc)
    })?;
    Ok(Waveform {
        t0_ps: input.t0_ps,
        dt_ps: input.dt_ps,
        samples,
    })
}

/// Output at port 2 for `pulse` driven into port 1 (S21).
pub fn through_response(
    net: &SParameterNetwork,
    pulse: &Waveform,
    opts: &ResponseOptions,
) -> Result<Waveform> {
    net.require_ports(2)?;
    filter_waveform(pulse, net, 1, 0, opts)
}

/// Wave reflected back to port 1 for `pulse` driven into port 1 (S11).
pub fn reflected_response(
    net: &SParameterNetwork,
    pulse: &Waveform,
    opts: &ResponseOptions,
) -> Result<Waveform> {
    filter_waveform(pulse, net, 0, 0, opts)
}

/// Step-response TDR at port 1 as impedance (ohm) versus round-trip time.
/// Time zero is the start of the incident edge; the record begins slightly
/// earlier.
///
/// The step has a half-cosine edge of `rise_ps` (0-100%); the network must
/// reach at least `2 / rise`.
pub fn tdr(net: &SParameterNetwork, rise_ps: f64, opts: &ResponseOptions) -> Result<Waveform> {
    if !(rise_ps > 0.0) {
        return Err(Error::InvalidParameter(format!("rise time {rise_ps} ps must be positive")));
    }
    let required = 2.0 / (rise_ps * 1e-12);
    if net.f_max() < required {
        return Err(Error::Bandwidth {
            available_hz: net.f_max(),
            required_hz: required,
        });
    }
    let dt_ps = rise_ps / 16.0;
    let dt_s = dt_ps * 1e-12;
    let n = record_points(opts.record_ps, dt_ps, 1);
    let trace = net.s11();
    // The edge starts after a lead-in so band-limiting pre-ringing is
    // integrated instead of wrapping to the end of the record.
    let lead_ps = (TDR_LEAD_RISE_TIMES * rise_ps / dt_ps).round() * dt_ps;
    let mut spec = vec![Complex64::new(1.0, 0.0); n];
    let deriv = apply_response(&mut spec, dt_s, net.f_max(), |f| {
        let lead = Complex64::from_polar(1.0, -2.0 * std::f64::consts::PI * f * lead_ps * 1e-12);
        Ok(lead
            * edge_spectrum(f, rise_ps * 1e-12)
            * interp_trace(&net.frequencies_hz, &trace, f, opts.extrapolate_dc)?)
    })?;

    let z0 = net.reference_ohms;
    let mut rho = 0.0;
    let mut prev = 0.0;
    let mut clamped = 0usize;
    let samples = deriv
        .iter()
        .map(|&d| {
            rho += 0.5 * (prev + d);
            prev = d;
            let r = if rho.abs() > RHO_CLAMP {
                clamped += 1;
                RHO_CLAMP.copysign(rho)
            } else {
                rho
            };
            z0 * (1.0 + r) / (1.0 - r)
        })
        .collect();
    if clamped > 0 {
        log::warn!("TDR reflection coefficient clamped to +/-{RHO_CLAMP} at {clamped} samples");
    }
    Ok(Waveform {
        t0_ps: -lead_ps,
        dt_ps,
        samples,
    })
}
