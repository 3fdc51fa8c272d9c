//! Monte Carlo tolerance study: sampled layer shift, barrel OD and trace
//! impedance per case, eye closure of the via in an equalized lossy channel.

use std::f64::consts::PI;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use schemars::JsonSchema;
use serde::{Deserialize, Serialize};

use crate::algebra::cascade;
use crate::designs::reference_via;
use crate::error::{Error, Result};
use crate::network::SParameterNetwork;
use crate::synth::{synth_lossy_stripline, synth_via_with, LineSpec, StackUp, ViaGeometry, ViaModelOptions};
use crate::time_domain::{eye_closure, harmonic_grid, optimize_2tap_ffe, prbs7, EyeConfig, EyeEngine, PRBS7_PERIOD};

/// Sampling distribution; only uniform is supported.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, JsonSchema)]
#[serde(deny_unknown_fields)]
pub struct Range {
    #[serde(default = "uniform")]
    pub distribution: String,
    pub min: f64,
    pub max: f64,
}

fn uniform() -> String {
    "uniform".into()
}

impl Range {
    pub fn uniform(min: f64, max: f64) -> Self {
        Self {
            distribution: uniform(),
            min,
            max,
        }
    }

    fn validate(&self, name: &str) -> Result<()> {
        if self.distribution != "uniform" {
            return Err(Error::Unsupported(format!(
                "{name}: distribution '{}' not supported; only 'uniform' is available",
                self.distribution
            )));
        }
        if !(self.min.is_finite() && self.max.is_finite()) || self.max < self.min {
            return Err(Error::InvalidParameter(format!(
                "{name}: range [{}, {}] must be finite with min <= max",
                self.min, self.max
            )));
        }
        Ok(())
    }

    /// One draw; a point range still advances the generator.
    fn sample(&self, rng: &mut ChaCha8Rng) -> f64 {
        let u: f64 = rng.gen();
        self.min + (self.max - self.min) * u
    }

    pub fn span(&self) -> f64 {
        self.max - self.min
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize, JsonSchema)]
#[serde(rename_all = "snake_case")]
pub enum ShiftMode {
    /// One offset shared by every layer of the sub-laminate.
    #[default]
    Rigid,
    /// Independent offset per metal layer.
    PerLayer,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, JsonSchema)]
#[serde(default, deny_unknown_fields)]
pub struct McConfig {
    pub case_count: usize,
    pub master_seed: u64,
    pub layer_shift_mil: Range,
    pub barrel_od_mil: Range,
    pub z_diff_ohm: Range,
    /// Advisory only.
    pub closure_threshold_mv_ui: f64,
    pub channel: LineSpec,
    pub shift_mode: ShiftMode,
    /// Antipad radius change per ohm of differential impedance deviation.
    pub etch_mil_per_ohm: f64,
    pub nominal_z_diff_ohm: f64,
    /// Defaults to the built-in reference via.
    pub via: Option<ViaGeometry>,
    pub stackup: Option<StackUp>,
    pub via_options: ViaModelOptions,
    pub eye: EyeConfig,
    pub prbs_seed: u8,
    /// Upper end of the harmonic analysis grid.
    pub grid_f_max_hz: f64,
    /// Fixed histogram bin count instead of Freedman-Diaconis.
    pub histogram_bins: Option<usize>,
}

impl Default for McConfig {
    fn default() -> Self {
        Self {
            case_count: 99,
            master_seed: 2021,
            layer_shift_mil: Range::uniform(0.0, 2.0),
            barrel_od_mil: Range::uniform(8.0, 10.0),
            z_diff_ohm: Range::uniform(93.0, 107.0),
            closure_threshold_mv_ui: 0.05,
            channel: LineSpec::default(),
            shift_mode: ShiftMode::Rigid,
            etch_mil_per_ohm: 0.25,
            nominal_z_diff_ohm: 100.0,
            via: None,
            stackup: None,
            via_options: ViaModelOptions::default(),
            eye: EyeConfig::default(),
            prbs_seed: 0x7f,
            grid_f_max_hz: 100e9,
            histogram_bins: None,
        }
    }
}

impl McConfig {
    pub fn validate(&self) -> Result<()> {
        if self.case_count == 0 {
            return Err(Error::InvalidParameter("case_count must be >= 1".into()));
        }
        self.layer_shift_mil.validate("layer_shift_mil")?;
        self.barrel_od_mil.validate("barrel_od_mil")?;
        self.z_diff_ohm.validate("z_diff_ohm")?;
        if self.layer_shift_mil.min < 0.0 || self.barrel_od_mil.min <= 0.0 || self.z_diff_ohm.min <= 0.0 {
            return Err(Error::InvalidParameter(
                "shift must be >= 0, OD and impedance > 0".into(),
            ));
        }
        if self.via.is_some() != self.stackup.is_some() {
            return Err(Error::InvalidParameter(
                "via and stackup must be given together".into(),
            ));
        }
        if !(self.grid_f_max_hz > 0.0) || !self.etch_mil_per_ohm.is_finite() {
            return Err(Error::InvalidParameter(
                "grid_f_max_hz must be positive and etch coefficient finite".into(),
            ));
        }
        if self.histogram_bins == Some(0) {
            return Err(Error::InvalidParameter("histogram_bins must be >= 1".into()));
        }
        self.channel.validate()
    }

    pub fn base_design(&self) -> (ViaGeometry, StackUp) {
        match (&self.via, &self.stackup) {
            (Some(g), Some(s)) => (g.clone(), s.clone()),
            _ => reference_via(),
        }
    }
}

/// SplitMix64 finalizer.
pub fn mix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Seed for case `index`: `mix64(master ^ index)`.
pub fn child_seed(master: u64, index: u64) -> u64 {
    mix64(master ^ index)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CaseParams {
    pub case_id: usize,
    pub seed: u64,
    /// Offset per metal layer (mil), dx/dy.
    pub layer_shift: Vec<[f64; 2]>,
    /// Largest offset magnitude over the layers.
    pub shift_mil: f64,
    pub barrel_od_mil: f64,
    pub z_diff_ohm: f64,
    /// Antipad radius change (mil).
    pub etch_delta_mil: f64,
}

/// Draws the parameter sets for all cases.
pub fn sample_cases(cfg: &McConfig) -> Result<Vec<CaseParams>> {
    cfg.validate()?;
    let metal_count = cfg.base_design().1.metal_layers.len();
    Ok((0..cfg.case_count)
        .map(|i| {
            let seed = child_seed(cfg.master_seed, i as u64);
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let draw_offset = |rng: &mut ChaCha8Rng| {
                let r = cfg.layer_shift_mil.sample(rng);
                let a = 2.0 * PI * rng.gen::<f64>();
                [r * a.cos(), r * a.sin()]
            };
            let layer_shift = match cfg.shift_mode {
                ShiftMode::Rigid => vec![draw_offset(&mut rng); metal_count],
                ShiftMode::PerLayer => (0..metal_count).map(|_| draw_offset(&mut rng)).collect(),
            };
            let barrel_od_mil = cfg.barrel_od_mil.sample(&mut rng);
            let z_diff_ohm = cfg.z_diff_ohm.sample(&mut rng);
            CaseParams {
                case_id: i,
                seed,
                shift_mil: layer_shift.iter().map(|s| s[0].hypot(s[1])).fold(0.0, f64::max),
                layer_shift,
                barrel_od_mil,
                etch_delta_mil: cfg.etch_mil_per_ohm * (z_diff_ohm - cfg.nominal_z_diff_ohm),
                z_diff_ohm,
            }
        })
        .collect())
}

/// No shift, base OD, nominal impedance.
pub fn nominal_case(cfg: &McConfig) -> CaseParams {
    let (geom, stack) = cfg.base_design();
    CaseParams {
        case_id: usize::MAX,
        seed: 0,
        layer_shift: vec![[0.0, 0.0]; stack.metal_layers.len()],
        shift_mil: 0.0,
        barrel_od_mil: geom.plated_od,
        z_diff_ohm: cfg.nominal_z_diff_ohm,
        etch_delta_mil: 0.0,
    }
}

/// Via geometry for one case.
pub fn case_geometry(params: &CaseParams, base: &ViaGeometry) -> ViaGeometry {
    let mut g = base.clone();
    g.plated_od = params.barrel_od_mil;
    for a in &mut g.antipad_diameter {
        *a += 2.0 * params.etch_delta_mil;
    }
    g.layer_shift = params.layer_shift.clone();
    g
}

/// Everything shared by the cases of one study.
#[derive(Debug, Clone)]
pub struct StudyContext {
    pub grid: Vec<f64>,
    pub bits: Vec<u8>,
    pub cfg: McConfig,
}

impl StudyContext {
    pub fn new(cfg: &McConfig) -> Result<Self> {
        cfg.validate()?;
        Ok(Self {
            grid: harmonic_grid(&cfg.eye, PRBS7_PERIOD, cfg.grid_f_max_hz),
            bits: prbs7(cfg.prbs_seed, PRBS7_PERIOD)?,
            cfg: cfg.clone(),
        })
    }

    /// Closure (mV*UI) of `via` behind `line`, against `line` alone, each
    /// equalized independently.
    pub fn channel_closure(&self, via: &SParameterNetwork, line: &LineSpec) -> Result<f64> {
        let z0 = self.cfg.via_options.reference_ohms;
        let line_net = synth_lossy_stripline(line, z0, &self.grid)?;
        let channel = cascade(&line_net, via)?;
        let with_via = optimize_2tap_ffe(&EyeEngine::new(&channel, &self.bits, &self.cfg.eye)?);
        let reference = optimize_2tap_ffe(&EyeEngine::new(&line_net, &self.bits, &self.cfg.eye)?);
        eye_closure(&with_via.eye, &reference.eye)
    }

    pub fn run_case(&self, params: &CaseParams) -> Result<f64> {
        let (base, stack) = self.cfg.base_design();
        let geom = case_geometry(params, &base);
        let via = synth_via_with(&geom, &stack, &self.grid, &self.cfg.via_options)?;
        let line = LineSpec {
            z_differential: params.z_diff_ohm,
            ..self.cfg.channel.clone()
        };
        self.channel_closure(&via, &line)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CaseResult {
    pub params: CaseParams,
    pub closure_mv_ui: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Histogram {
    pub edges: Vec<f64>,
    pub counts: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct McResult {
    pub per_case: Vec<CaseResult>,
    pub mean: f64,
    /// Sample standard deviation; undefined for a single case.
    pub sigma: Option<f64>,
    pub three_sigma_limit: Option<f64>,
    pub nominal: CaseResult,
    pub histogram: Histogram,
    pub threshold_mv_ui: f64,
    /// `three_sigma_limit <= threshold`; false when undefined.
    pub pass: bool,
}

/// Linear-interpolated quantile of sorted data.
fn quantile(sorted: &[f64], q: f64) -> f64 {
    let pos = q * (sorted.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    sorted[lo] + (sorted[hi] - sorted[lo]) * (pos - lo as f64)
}

/// Bin edges by the Freedman-Diaconis rule (one bin when the data has no
/// spread).
pub fn freedman_diaconis_edges(values: &[f64]) -> Vec<f64> {
    let mut sorted = values.to_vec();
    sorted.sort_by(f64::total_cmp);
    let (lo, hi) = (sorted[0], sorted[sorted.len() - 1]);
    let iqr = quantile(&sorted, 0.75) - quantile(&sorted, 0.25);
    let width = 2.0 * iqr / (sorted.len() as f64).cbrt();
    let bins = if hi > lo && width > 0.0 {
        ((hi - lo) / width).ceil().max(1.0) as usize
    } else {
        1
    };
    uniform_edges(lo, hi, bins)
}

fn uniform_edges(lo: f64, hi: f64, bins: usize) -> Vec<f64> {
    let (lo, hi) = if hi > lo { (lo, hi) } else { (lo - 0.5, lo + 0.5) };
    (0..=bins)
        .map(|i| lo + (hi - lo) * i as f64 / bins as f64)
        .collect()
}

/// Counts per bin; the last bin includes its upper edge, values outside
/// the edges are ignored.
pub fn histogram_with_edges(values: &[f64], edges: &[f64]) -> Histogram {
    let bins = edges.len() - 1;
    let mut counts = vec![0; bins];
    for &v in values {
        if v < edges[0] || v > edges[bins] {
            continue;
        }
        let i = edges.partition_point(|&e| e <= v).saturating_sub(1).min(bins - 1);
        counts[i] += 1;
    }
    Histogram {
        edges: edges.to_vec(),
        counts,
    }
}

/// Statistics over the case closures.
pub fn aggregate(per_case: Vec<CaseResult>, nominal: CaseResult, cfg: &McConfig) -> McResult {
    let values: Vec<f64> = per_case.iter().map(|c| c.closure_mv_ui).collect();
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let sigma = (values.len() >= 2)
        .then(|| (values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / (n - 1.0)).sqrt());
    let three_sigma_limit = sigma.map(|s| mean + 3.0 * s);
    let edges = match cfg.histogram_bins {
        Some(b) => {
            let lo = values.iter().copied().fold(f64::INFINITY, f64::min);
            let hi = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            uniform_edges(lo, hi, b)
        }
        None => freedman_diaconis_edges(&values),
    };
    McResult {
        histogram: histogram_with_edges(&values, &edges),
        per_case,
        mean,
        sigma,
        three_sigma_limit,
        nominal,
        threshold_mv_ui: cfg.closure_threshold_mv_ui,
        pass: three_sigma_limit.map_or(false, |l| l <= cfg.closure_threshold_mv_ui),
    }
}

/// Runs the study on `jobs` worker threads (0 = all cores). Results do not
/// depend on `jobs`. `progress` is called with (done, total).
pub fn run_monte_carlo(
    cfg: &McConfig,
    jobs: usize,
    progress: &(dyn Fn(usize, usize) + Sync),
) -> Result<McResult> {
    let ctx = StudyContext::new(cfg)?;
    let cases = sample_cases(cfg)?;
    let total = cases.len();
    let done = std::sync::atomic::AtomicUsize::new(0);
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(jobs)
        .build()
        .map_err(|e| Error::InvalidParameter(format!("thread pool: {e}")))?;
    let per_case: Vec<CaseResult> = pool.install(|| {
        cases
            .into_par_iter()
            .map(|params| {
                let closure_mv_ui = ctx.run_case(&params)?;
                let d = done.fetch_add(1, std::sync::atomic::Ordering::Relaxed) + 1;
                progress(d, total);
                Ok(CaseResult {
                    params,
                    closure_mv_ui,
                })
            })
            .collect::<Result<Vec<_>>>()
    })?;
    let nominal_params = nominal_case(cfg);
    let nominal = CaseResult {
        closure_mv_ui: ctx.run_case(&nominal_params)?,
        params: nominal_params,
    };
    Ok(aggregate(per_case, nominal, cfg))
}

/// Same study with the layer-shift range widened to `[min, new_shift_max]`.
pub fn rerun_with_shift(
    cfg: &McConfig,
    new_shift_max_mil: f64,
    jobs: usize,
    progress: &(dyn Fn(usize, usize) + Sync),
) -> Result<McResult> {
    let mut wider = cfg.clone();
    wider.layer_shift_mil.max = new_shift_max_mil;
    run_monte_carlo(&wider, jobs, progress)
}

/// Two studies binned on common edges.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ShiftComparison {
    pub edges: Vec<f64>,
    pub baseline_counts: Vec<usize>,
    pub rerun_counts: Vec<usize>,
}

pub fn compare_studies(baseline: &McResult, rerun: &McResult) -> ShiftComparison {
    let all: Vec<f64> = baseline
        .per_case
        .iter()
        .chain(&rerun.per_case)
        .map(|c| c.closure_mv_ui)
        .collect();
    let edges = freedman_diaconis_edges(&all);
    let counts = |r: &McResult| {
        let v: Vec<f64> = r.per_case.iter().map(|c| c.closure_mv_ui).collect();
        histogram_with_edges(&v, &edges).counts
    };
    ShiftComparison {
        baseline_counts: counts(baseline),
        rerun_counts: counts(rerun),
        edges,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::synth::synth_thru;

    fn result(v: f64) -> CaseResult {
        CaseResult {
            params: nominal_case(&McConfig::default()),
            closure_mv_ui: v,
        }
    }

    #[test]
    fn statistics_of_one_two_three() {
        let r = aggregate(vec![result(1.0), result(2.0), result(3.0)], result(0.0), &McConfig {
            closure_threshold_mv_ui: 5.0,
            ..McConfig::default()
        });
        assert_eq!(r.mean, 2.0);
        assert_eq!(r.sigma, Some(1.0));
        assert_eq!(r.three_sigma_limit, Some(5.0));
        assert!(r.pass);
        assert_eq!(r.histogram.counts.iter().sum::<usize>(), 3);
    }

    #[test]
    fn threshold_boundary_and_single_case() {
        let cases = vec![result(1.0), result(2.0), result(3.0)];
        let below = McConfig {
            closure_threshold_mv_ui: 5.0 - 1e-9,
            ..McConfig::default()
        };
        assert!(!aggregate(cases.clone(), result(0.0), &below).pass);
        let single = aggregate(vec![result(1.0)], result(0.0), &McConfig::default());
        assert_eq!(single.sigma, None);
        assert!(!single.pass);
        let flat = aggregate(vec![result(4.0); 5], result(0.0), &McConfig::default());
        assert_eq!(flat.sigma, Some(0.0));
        assert_eq!(flat.three_sigma_limit, Some(4.0));
    }

    #[test]
    fn sampling_is_deterministic_and_in_range() {
        let cfg = McConfig::default();
        let a = sample_cases(&cfg).unwrap();
        assert_eq!(a, sample_cases(&cfg).unwrap());
        let span = |f: &dyn Fn(&CaseParams) -> f64| {
            let v: Vec<f64> = a.iter().map(f).collect();
            let lo = v.iter().copied().fold(f64::INFINITY, f64::min);
            let hi = v.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            (lo, hi)
        };
        let (lo, hi) = span(&|c| c.shift_mil);
        assert!(lo >= 0.0 && hi <= 2.0 && hi - lo >= 1.8);
        let (lo, hi) = span(&|c| c.barrel_od_mil);
        assert!(lo >= 8.0 && hi <= 10.0 && hi - lo >= 1.8);
        let (lo, hi) = span(&|c| c.z_diff_ohm);
        assert!(lo >= 93.0 && hi <= 107.0 && hi - lo >= 12.6);
    }

    #[test]
    fn point_ranges_give_identical_cases() {
        let cfg = McConfig {
            layer_shift_mil: Range::uniform(1.0, 1.0),
            barrel_od_mil: Range::uniform(9.0, 9.0),
            z_diff_ohm: Range::uniform(100.0, 100.0),
            case_count: 5,
            ..McConfig::default()
        };
        let cases = sample_cases(&cfg).unwrap();
        for c in &cases {
            assert_eq!(c.shift_mil, 1.0);
            assert_eq!(c.barrel_od_mil, 9.0);
            assert_eq!(c.etch_delta_mil, 0.0);
        }
    }

    #[test]
    fn non_uniform_distribution_rejected() {
        let mut cfg = McConfig::default();
        cfg.z_diff_ohm.distribution = "gaussian".into();
        let err = sample_cases(&cfg).unwrap_err();
        assert!(err.to_string().contains("uniform"));
    }

    #[test]
    fn thru_via_on_zero_length_channel_has_no_closure() {
        let cfg = McConfig {
            channel: LineSpec {
                length: 0.0,
                il_at_nyquist: 0.0,
                ..LineSpec::default()
            },
            ..McConfig::default()
        };
        let ctx = StudyContext::new(&cfg).unwrap();
        let thru = synth_thru(&ctx.grid, 50.0).unwrap();
        assert_eq!(ctx.channel_closure(&thru, &cfg.channel).unwrap(), 0.0);
    }

    #[test]
    fn histogram_edges_cover_data() {
        let v: Vec<f64> = (0..99).map(|i| (i as f64 * 0.37).sin()).collect();
        let edges = freedman_diaconis_edges(&v);
        let h = histogram_with_edges(&v, &edges);
        assert_eq!(h.counts.iter().sum::<usize>(), 99);
        assert!(edges.windows(2).all(|w| w[1] > w[0]));
    }

    #[test]
    fn child_seeds_differ() {
        assert_ne!(child_seed(1, 0), child_seed(1, 1));
        assert_eq!(child_seed(7, 3), mix64(7 ^ 3));
    }
}
