//! Command-line front end. Every output file is written below `--out-dir`.

use std::ffi::OsString;
use std::path::{Component, Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use schemars::JsonSchema;
use serde::{Deserialize, Serialize};

use crate::algebra::{bisect_thru, cascade_all, single_ended_to_mixed_mode, PortMap};
use crate::brv::{extract_brv, BrvOptions, HumpLine};
use crate::designs::{reference_via, MIL_PER_MM};
use crate::error::{Error, Result};
use crate::export;
use crate::mc::{compare_studies, rerun_with_shift, run_monte_carlo, McConfig};
use crate::network::{db, linear_grid, DataFormat, SParameterNetwork};
use crate::rules::{check_rules, emit_fab_notes, GeometryAudit, RuleSet};
use crate::synth::{
    synth_lossy_stripline, synth_shunt_capacitor, synth_via_with, LineSpec, StackUp, ViaGeometry,
    ViaModelOptions, ViaModelSummary,
};
use crate::time_domain::{
    eye_closure, make_pulse, optimize_2tap_ffe, prbs7, reflected_response, tdr, through_response,
    EqualizerTaps, EyeConfig, EyeEngine, PulseSpec, ResponseOptions, TapNormalization,
    PRBS7_PERIOD,
};
use crate::touchstone::{parse_touchstone, write_touchstone, FrequencyUnit};

#[derive(Debug, Parser)]
#[command(name = "viaqual", version, about = "High-speed PCB via qualification toolkit")]
pub struct Cli {
    /// Master seed for stochastic commands (overrides config files).
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Directory receiving every output file.
    #[arg(long, global = true, default_value = ".")]
    pub out_dir: PathBuf,
    /// Worker threads for Monte Carlo (0 = all cores).
    #[arg(long, global = true, default_value_t = 0)]
    pub jobs: usize,
    /// Increase log detail (-v info, -vv debug).
    #[arg(short, long, global = true, action = clap::ArgAction::Count)]
    pub verbose: u8,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Rewrite a Touchstone file in another format or unit.
    Convert(ConvertArgs),
    /// Cascade two-ports in order.
    Cascade(CascadeArgs),
    /// Split a symmetric 2x-thru into its half.
    Bisect(BisectArgs),
    /// Single-ended 4-port to mixed-mode blocks.
    Mixedmode(MixedModeArgs),
    /// Impedance profile from port-1 reflection.
    Tdr(TdrArgs),
    /// Through and reflected pulse responses.
    Pulse(PulseArgs),
    /// PRBS7 eye diagram, optionally equalized and compared to a reference.
    Eye(EyeArgs),
    /// Broadband reflected voltage of port-1 reflection.
    Brv(BrvArgs),
    /// Causal lossy stripline.
    SynthLine(SynthLineArgs),
    /// Shunt capacitor.
    SynthCap(SynthCapArgs),
    /// Via model from geometry and stack-up.
    SynthVia(SynthViaArgs),
    /// Monte Carlo tolerance study.
    Mc(McArgs),
    /// Audit measured geometry against fabrication rules.
    CheckRules(CheckRulesArgs),
    /// Fabrication-drawing notes for a rule set.
    FabNotes(FabNotesArgs),
}

#[derive(Debug, Args)]
pub struct OutputFormat {
    /// Touchstone data format.
    #[arg(long, default_value = "RI")]
    pub format: DataFormat,
    /// Touchstone frequency unit.
    #[arg(long, default_value = "GHz")]
    pub unit: FrequencyUnit,
}

#[derive(Debug, Args)]
pub struct ConvertArgs {
    #[arg(long = "in")]
    pub input: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
    /// Port count of the input; overrides the file extension.
    #[arg(long)]
    pub ports: Option<usize>,
    #[command(flatten)]
    pub fmt: OutputFormat,
}

#[derive(Debug, Args)]
pub struct CascadeArgs {
    /// Two-port files, first to last.
    #[arg(long = "in", required = true, num_args = 1..)]
    pub inputs: Vec<PathBuf>,
    #[arg(long)]
    pub out: PathBuf,
    #[command(flatten)]
    pub fmt: OutputFormat,
}

#[derive(Debug, Args)]
pub struct BisectArgs {
    #[arg(long = "in")]
    pub input: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
    #[command(flatten)]
    pub fmt: OutputFormat,
}

#[derive(Debug, Args)]
pub struct MixedModeArgs {
    #[arg(long = "in")]
    pub input: PathBuf,
    /// Output prefix; writes <prefix>_sdd.s2p, _sdc, _scd, _scc.
    #[arg(long)]
    pub out: PathBuf,
    /// Ports (p,n) of pair A.
    #[arg(long, value_parser = parse_pair, default_value = "1,3")]
    pub pair_a: (usize, usize),
    /// Ports (p,n) of pair B.
    #[arg(long, value_parser = parse_pair, default_value = "2,4")]
    pub pair_b: (usize, usize),
    #[command(flatten)]
    pub fmt: OutputFormat,
}

#[derive(Debug, Args)]
pub struct TdrArgs {
    #[arg(long = "in")]
    pub input: PathBuf,
    /// 0-100% edge time.
    #[arg(long, default_value_t = 20.0)]
    pub rise_ps: f64,
    #[arg(long, default_value_t = 2000.0)]
    pub record_ps: f64,
    #[arg(long, default_value = "tdr.csv")]
    pub out: PathBuf,
    #[arg(long)]
    pub svg: bool,
}

#[derive(Debug, Args)]
pub struct PulseArgs {
    #[arg(long = "in")]
    pub input: PathBuf,
    #[arg(long, default_value_t = 18.0)]
    pub width_ps: f64,
    #[arg(long, default_value_t = 6.0)]
    pub edge_ps: f64,
    #[arg(long, default_value_t = 0.25)]
    pub dt_ps: f64,
    #[arg(long, default_value_t = 2000.0)]
    pub record_ps: f64,
    /// Output prefix; writes <prefix>_through.csv and <prefix>_reflected.csv.
    #[arg(long, default_value = "pulse")]
    pub out: PathBuf,
    #[arg(long)]
    pub svg: bool,
}

#[derive(Debug, Args)]
pub struct EyeArgs {
    #[arg(long = "in")]
    pub input: PathBuf,
    /// Reference channel for the closure metric.
    #[arg(long)]
    pub reference: Option<PathBuf>,
    /// Search the two-tap FFE (reference is equalized independently).
    #[arg(long)]
    pub ffe: bool,
    #[arg(long, default_value = "unit-main")]
    pub tap_normalization: TapNormalization,
    #[arg(long, default_value_t = 64)]
    pub samples_per_ui: usize,
    #[arg(long, default_value_t = 6.0)]
    pub edge_ps: f64,
    #[arg(long, default_value_t = 127)]
    pub prbs_seed: u8,
    /// Output prefix; writes <prefix>.csv and <prefix>.json.
    #[arg(long, default_value = "eye")]
    pub out: PathBuf,
    #[arg(long)]
    pub svg: bool,
}

#[derive(Debug, Args)]
pub struct BrvArgs {
    #[arg(long = "in")]
    pub input: PathBuf,
    #[arg(long, default_value_t = 28e9)]
    pub nyquist: f64,
    #[arg(long, default_value_t = 3.0)]
    pub prominence_db: f64,
    #[arg(long, requires = "band_hi")]
    pub band_lo: Option<f64>,
    #[arg(long, requires = "band_lo")]
    pub band_hi: Option<f64>,
    #[arg(long)]
    pub upper_tangent: bool,
    #[arg(long, default_value = "brv.json")]
    pub json: PathBuf,
    #[arg(long)]
    pub csv: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct GridArgs {
    #[arg(long, default_value_t = 0.0)]
    pub f_start: f64,
    #[arg(long, default_value_t = 100e9)]
    pub f_stop: f64,
    #[arg(long, default_value_t = 1001)]
    pub points: usize,
    #[arg(long, default_value_t = 50.0)]
    pub z0: f64,
}

#[derive(Debug, Args)]
pub struct SynthLineArgs {
    #[arg(long, default_value_t = 0.1)]
    pub length_m: f64,
    #[arg(long, default_value_t = 100.0)]
    pub z_diff: f64,
    #[arg(long, default_value_t = 15.0)]
    pub il_db: f64,
    #[arg(long, default_value_t = 28e9)]
    pub nyquist: f64,
    #[arg(long, default_value_t = 1.0 / 3.0)]
    pub loss_partition: f64,
    #[arg(long, default_value_t = 3.5)]
    pub er_eff: f64,
    #[command(flatten)]
    pub grid: GridArgs,
    #[arg(long, default_value = "line.s2p")]
    pub out: PathBuf,
    #[command(flatten)]
    pub fmt: OutputFormat,
}

#[derive(Debug, Args)]
pub struct SynthCapArgs {
    #[arg(long)]
    pub c_ff: f64,
    #[command(flatten)]
    pub grid: GridArgs,
    #[arg(long, default_value = "cap.s2p")]
    pub out: PathBuf,
    #[command(flatten)]
    pub fmt: OutputFormat,
}

#[derive(Debug, Args)]
pub struct SynthViaArgs {
    /// Via document (JSON with units, stackup, via); built-in design if omitted.
    #[arg(long)]
    pub geometry: Option<PathBuf>,
    #[command(flatten)]
    pub grid: GridArgs,
    #[arg(long, default_value = "via.s2p")]
    pub out: PathBuf,
    /// Also write the model summary as JSON.
    #[arg(long)]
    pub summary: Option<PathBuf>,
    #[command(flatten)]
    pub fmt: OutputFormat,
}

#[derive(Debug, Args)]
pub struct McArgs {
    /// McConfig JSON; defaults if omitted.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Also run with the shift range widened to this maximum (mil).
    #[arg(long)]
    pub rerun_shift: Option<f64>,
    /// Output prefix; writes <prefix>.json, <prefix>_cases.csv, <prefix>_hist.csv.
    #[arg(long, default_value = "mc")]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct CheckRulesArgs {
    #[arg(long)]
    pub audit: PathBuf,
    #[arg(long)]
    pub rules: Option<PathBuf>,
    #[arg(long, default_value = "rules_report.json")]
    pub json: PathBuf,
}

#[derive(Debug, Args)]
pub struct FabNotesArgs {
    #[arg(long)]
    pub rules: Option<PathBuf>,
    #[arg(long, default_value = "fab_notes.txt")]
    pub out: PathBuf,
}

fn parse_pair(s: &str) -> std::result::Result<(usize, usize), String> {
    let (a, b) = s.split_once(',').ok_or("expected p,n")?;
    Ok((
        a.trim().parse().map_err(|e| format!("{e}"))?,
        b.trim().parse().map_err(|e| format!("{e}"))?,
    ))
}

/// Length unit of a via document.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, JsonSchema)]
#[serde(rename_all = "lowercase")]
pub enum LengthUnit {
    Mil,
    Mm,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, JsonSchema)]
#[serde(deny_unknown_fields)]
pub struct Units {
    pub length: LengthUnit,
}

/// Via document: stack-up and geometry in the declared length unit.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, JsonSchema)]
#[serde(deny_unknown_fields)]
pub struct ViaDocument {
    pub units: Units,
    pub stackup: StackUp,
    pub via: ViaGeometry,
    #[serde(default)]
    pub options: ViaModelOptions,
}

impl ViaDocument {
    /// Stack-up and geometry in mil.
    pub fn into_mil(self) -> (ViaGeometry, StackUp, ViaModelOptions) {
        let (mut g, mut s) = (self.via, self.stackup);
        if self.units.length == LengthUnit::Mm {
            let k = MIL_PER_MM;
            for l in &mut s.layers {
                l.thickness *= k;
            }
            g.drill_diameter *= k;
            g.plated_od *= k;
            g.wicking_depth *= k;
            g.pad_diameter.iter_mut().for_each(|v| *v *= k);
            g.antipad_diameter.iter_mut().for_each(|v| *v *= k);
            g.layer_shift.iter_mut().for_each(|v| {
                v[0] *= k;
                v[1] *= k;
            });
        }
        (g, s, self.options)
    }
}

struct Ctx {
    out_dir: PathBuf,
}

impl Ctx {
    /// Resolves `name` under the output directory, refusing escapes.
    fn path(&self, name: &Path) -> Result<PathBuf> {
        if name.is_absolute()
            || name
                .components()
                .any(|c| !matches!(c, Component::Normal(_) | Component::CurDir))
        {
            return Err(Error::InvalidParameter(format!(
                "output name '{}' must be relative and stay inside --out-dir",
                name.display()
            )));
        }
        Ok(self.out_dir.join(name))
    }

    fn write(&self, name: &Path, contents: &str) -> Result<()> {
        let path = self.path(name)?;
        if let Some(parent) = path.parent() {
            std::fs::create_dir_all(parent)?;
        }
        std::fs::write(&path, contents)?;
        log::info!("wrote {}", path.display());
        Ok(())
    }

    fn write_json<T: Serialize>(&self, name: &Path, value: &T) -> Result<()> {
        let mut s = serde_json::to_string_pretty(value)?;
        s.push('\n');
        self.write(name, &s)
    }
}

fn with_suffix(prefix: &Path, suffix: &str) -> PathBuf {
    let mut s = prefix.as_os_str().to_owned();
    s.push(suffix);
    PathBuf::from(s)
}

fn port_hint(path: &Path) -> Option<usize> {
    let ext = path.extension()?.to_str()?.to_ascii_lowercase();
    let digits = ext.strip_prefix('s')?.strip_suffix('p')?;
    digits.parse().ok()
}

pub fn read_network(path: &Path) -> Result<SParameterNetwork> {
    read_network_with_ports(path, None)
}

/// Reads a Touchstone file; `ports` takes precedence over the extension.
pub fn read_network_with_ports(path: &Path, ports: Option<usize>) -> Result<SParameterNetwork> {
    let text = std::fs::read_to_string(path)?;
    parse_touchstone(&text, ports.or_else(|| port_hint(path)))
}

fn read_json<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<T> {
    Ok(serde_json::from_str(&std::fs::read_to_string(path)?)?)
}

/// 2-ports pass through; 4-ports reduce to their differential block.
fn as_two_port(net: SParameterNetwork) -> Result<SParameterNetwork> {
    match net.port_count {
        2 => Ok(net),
        4 => {
            log::info!("4-port input: using SDD with pairs (1,3)/(2,4)");
            Ok(single_ended_to_mixed_mode(&net, PortMap::default())?.sdd)
        }
        n => Err(Error::InvalidNetwork(format!("expected a 2- or 4-port, got {n} ports"))),
    }
}

/// 1- and 2-ports pass through; 4-ports reduce to their differential block.
fn as_reflection_port(net: SParameterNetwork) -> Result<SParameterNetwork> {
    if net.port_count == 1 {
        Ok(net)
    } else {
        as_two_port(net)
    }
}

fn grid(args: &GridArgs) -> Result<Vec<f64>> {
    if args.points < 2 || !(args.f_stop > args.f_start) || args.f_start < 0.0 {
        return Err(Error::InvalidParameter(
            "grid needs >= 2 points and 0 <= f_start < f_stop".into(),
        ));
    }
    Ok(linear_grid(args.f_start, args.f_stop, args.points))
}

fn write_net(ctx: &Ctx, name: &Path, net: &SParameterNetwork, fmt: &OutputFormat) -> Result<()> {
    ctx.write(name, &write_touchstone(net, fmt.format, fmt.unit))
}

#[derive(Serialize)]
struct EyeReport {
    taps: EqualizerTaps,
    inner_height_v: f64,
    inner_width_ui: f64,
    closed: bool,
    unequalized_height_v: Option<f64>,
    reference_taps: Option<EqualizerTaps>,
    eye_closure_mv_ui: Option<f64>,
    truncated_harmonics: usize,
}

#[derive(Serialize)]
struct McReport<'a> {
    config: &'a McConfig,
    result: &'a crate::mc::McResult,
    rerun: Option<&'a crate::mc::McResult>,
}

fn execute(cli: &Cli) -> Result<i32> {
    let ctx = Ctx {
        out_dir: cli.out_dir.clone(),
    };
    match &cli.command {
        Command::Convert(a) => {
            let net = read_network_with_ports(&a.input, a.ports)?;
            write_net(&ctx, &a.out, &net, &a.fmt)?;
        }
        Command::Cascade(a) => {
            let nets = a.inputs.iter().map(|p| read_network(p)).collect::<Result<Vec<_>>>()?;
            let refs: Vec<&SParameterNetwork> = nets.iter().collect();
            write_net(&ctx, &a.out, &cascade_all(&refs)?, &a.fmt)?;
        }
        Command::Bisect(a) => {
            let b = bisect_thru(&read_network(&a.input)?)?;
            log::info!("bisection residual {:.3e}", b.residual);
            write_net(&ctx, &a.out, &b.half, &a.fmt)?;
        }
        Command::Mixedmode(a) => {
            let map = PortMap {
                pair_a: a.pair_a,
                pair_b: a.pair_b,
            };
            let mm = single_ended_to_mixed_mode(&read_network(&a.input)?, map)?;
            for (tag, net) in [("sdd", &mm.sdd), ("sdc", &mm.sdc), ("scd", &mm.scd), ("scc", &mm.scc)] {
                write_net(&ctx, &with_suffix(&a.out, &format!("_{tag}.s2p")), net, &a.fmt)?;
            }
        }
        Command::Tdr(a) => {
            let net = as_reflection_port(read_network(&a.input)?)?;
            let opts = ResponseOptions {
                record_ps: a.record_ps,
                ..ResponseOptions::default()
            };
            let z = tdr(&net, a.rise_ps, &opts)?;
            ctx.write(&a.out, &export::waveform_csv(&z, "impedance_ohm"))?;
            if a.svg {
                let pts = z.samples.iter().enumerate().map(|(i, &v)| (z.time_ps(i), v)).collect();
                let svg = export::svg_plot("TDR", "time (ps)", "ohm", &[export::Series { name: "Z", points: pts }]);
                ctx.write(&a.out.with_extension("svg"), &svg)?;
            }
        }
        Command::Pulse(a) => {
            let net = as_two_port(read_network(&a.input)?)?;
            let pulse = make_pulse(
                &PulseSpec {
                    width_ps: a.width_ps,
                    edge_ps: a.edge_ps,
                    amplitude_v: 1.0,
                },
                a.dt_ps,
            )?;
            let opts = ResponseOptions {
                record_ps: a.record_ps,
                ..ResponseOptions::default()
            };
            let through = through_response(&net, &pulse, &opts)?;
            let reflected = reflected_response(&net, &pulse, &opts)?;
            ctx.write(&with_suffix(&a.out, "_through.csv"), &export::waveform_csv(&through, "v"))?;
            ctx.write(&with_suffix(&a.out, "_reflected.csv"), &export::waveform_csv(&reflected, "v"))?;
            if a.svg {
                let pts = |w: &crate::time_domain::Waveform| {
                    w.samples.iter().enumerate().map(|(i, &v)| (w.time_ps(i), v)).collect()
                };
                let svg = export::svg_plot(
                    "Pulse response",
                    "time (ps)",
                    "V",
                    &[
                        export::Series { name: "through", points: pts(&through) },
                        export::Series { name: "reflected", points: pts(&reflected) },
                    ],
                );
                ctx.write(&with_suffix(&a.out, ".svg"), &svg)?;
            }
        }
        Command::Eye(a) => {
            let cfg = EyeConfig {
                samples_per_ui: a.samples_per_ui,
                edge_ps: a.edge_ps,
                tap_normalization: a.tap_normalization,
                ..EyeConfig::default()
            };
            let bits = prbs7(a.prbs_seed, PRBS7_PERIOD)?;
            let run = |net: &SParameterNetwork| -> Result<(crate::time_domain::EyeDiagram, Option<f64>, bool)> {
                let engine = EyeEngine::new(net, &bits, &cfg)?;
                if a.ffe {
                    let r = optimize_2tap_ffe(&engine);
                    Ok((r.eye, Some(r.unequalized_height_v), r.closed))
                } else {
                    let eye = engine.eye(EqualizerTaps::default());
                    let closed = !eye.is_open();
                    Ok((eye, None, closed))
                }
            };
            let (eye, uneq, closed) = run(&as_two_port(read_network(&a.input)?)?)?;
            let (closure, reference_taps) = match &a.reference {
                Some(p) => {
                    let (r, _, _) = run(&as_two_port(read_network(p)?)?)?;
                    (Some(eye_closure(&eye, &r)?), Some(r.taps))
                }
                None => (None, None),
            };
            let m = eye.metrics();
            ctx.write(&with_suffix(&a.out, ".csv"), &export::eye_csv(&eye))?;
            ctx.write_json(
                &with_suffix(&a.out, ".json"),
                &EyeReport {
                    taps: eye.taps,
                    inner_height_v: m.inner_height_v,
                    inner_width_ui: m.inner_width_ui,
                    closed,
                    unequalized_height_v: uneq,
                    reference_taps,
                    eye_closure_mv_ui: closure,
                    truncated_harmonics: eye.truncated_harmonics,
                },
            )?;
            if a.svg {
                ctx.write(&with_suffix(&a.out, ".svg"), &export::eye_svg(&eye, "Eye"))?;
            }
        }
        Command::Brv(a) => {
            let net = as_reflection_port(read_network(&a.input)?)?;
            let opts = BrvOptions {
                prominence_db: a.prominence_db,
                band_hz: a.band_lo.zip(a.band_hi),
                line: if a.upper_tangent {
                    HumpLine::UpperTangent
                } else {
                    HumpLine::LeastSquares
                },
            };
            let mag: Vec<f64> = net.s11().iter().map(|z| z.norm()).collect();
            let r = extract_brv(&net.frequencies_hz, &mag, a.nyquist, &opts)?;
            ctx.write_json(&a.json, &r)?;
            if let Some(csv) = &a.csv {
                let levels: Vec<f64> = net.s11().iter().map(|&z| db(z)).collect();
                ctx.write(csv, &export::brv_csv(&net.frequencies_hz, &levels, &r))?;
            }
        }
        Command::SynthLine(a) => {
            let spec = LineSpec {
                length: a.length_m,
                z_differential: a.z_diff,
                il_at_nyquist: a.il_db,
                nyquist_hz: a.nyquist,
                loss_partition: a.loss_partition,
                er_effective: a.er_eff,
            };
            let net = synth_lossy_stripline(&spec, a.grid.z0, &grid(&a.grid)?)?;
            write_net(&ctx, &a.out, &net, &a.fmt)?;
        }
        Command::SynthCap(a) => {
            let net = synth_shunt_capacitor(a.c_ff * 1e-15, a.grid.z0, &grid(&a.grid)?)?;
            write_net(&ctx, &a.out, &net, &a.fmt)?;
        }
        Command::SynthVia(a) => {
            let (geom, stack, mut opts) = match &a.geometry {
                Some(p) => read_json::<ViaDocument>(p)?.into_mil(),
                None => {
                    let (g, s) = reference_via();
                    (g, s, ViaModelOptions::default())
                }
            };
            opts.reference_ohms = a.grid.z0;
            let net = synth_via_with(&geom, &stack, &grid(&a.grid)?, &opts)?;
            write_net(&ctx, &a.out, &net, &a.fmt)?;
            if let Some(s) = &a.summary {
                ctx.write_json(s, &ViaModelSummary::build(&geom, &stack, &opts)?)?;
            }
        }
        Command::Mc(a) => {
            let mut cfg: McConfig = match &a.config {
                Some(p) => read_json(p)?,
                None => McConfig::default(),
            };
            if let Some(seed) = cli.seed {
                cfg.master_seed = seed;
            }
            let progress = |done: usize, total: usize| {
                if done == total || done % 10 == 0 {
                    eprintln!("mc: {done}/{total} cases");
                }
            };
            let result = run_monte_carlo(&cfg, cli.jobs, &progress)?;
            ctx.write(&with_suffix(&a.out, "_cases.csv"), &export::mc_cases_csv(&result))?;
            ctx.write(&with_suffix(&a.out, "_hist.csv"), &export::histogram_csv(&result.histogram))?;
            let rerun = match a.rerun_shift {
                Some(max) => {
                    let r = rerun_with_shift(&cfg, max, cli.jobs, &progress)?;
                    ctx.write(&with_suffix(&a.out, "_rerun_cases.csv"), &export::mc_cases_csv(&r))?;
                    ctx.write(
                        &with_suffix(&a.out, "_compare_hist.csv"),
                        &export::comparison_csv(&compare_studies(&result, &r)),
                    )?;
                    Some(r)
                }
                None => None,
            };
            ctx.write_json(
                &with_suffix(&a.out, ".json"),
                &McReport {
                    config: &cfg,
                    result: &result,
                    rerun: rerun.as_ref(),
                },
            )?;
            eprintln!(
                "mc: mean {:.4} mV*UI, 3-sigma limit {} (threshold {} mV*UI, advisory)",
                result.mean,
                result
                    .three_sigma_limit
                    .map_or("undefined".to_string(), |v| format!("{v:.4}")),
                result.threshold_mv_ui
            );
        }
        Command::CheckRules(a) => {
            let audit: GeometryAudit = read_json(&a.audit)?;
            let rules: RuleSet = match &a.rules {
                Some(p) => read_json(p)?,
                None => RuleSet::default(),
            };
            rules.validate()?;
            let report = check_rules(&audit, &rules);
            ctx.write_json(&a.json, &report)?;
            print!("{}", report.to_text());
            if !report.overall_pass {
                return Ok(1);
            }
        }
        Command::FabNotes(a) => {
            let rules: RuleSet = match &a.rules {
                Some(p) => read_json(p)?,
                None => RuleSet::default(),
            };
            ctx.write(&a.out, &emit_fab_notes(&rules)?)?;
        }
    }
    Ok(0)
}

/// Parses `argv` (program name first) and runs it. Returns the exit code:
/// 0 success, 1 domain error or failed audit, 2 usage error.
pub fn run<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return e.exit_code();
        }
    };
    let level = match cli.verbose {
        0 => log::LevelFilter::Warn,
        1 => log::LevelFilter::Info,
        _ => log::LevelFilter::Debug,
    };
    let _ = env_logger::Builder::new()
        .filter_level(level)
        .format_timestamp(None)
        .try_init();
    match execute(&cli) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            1
        }
    }
}
