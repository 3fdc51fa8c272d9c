use nalgebra::DMatrix;
use num_complex::Complex64;
use proptest::prelude::*;

use viaqual::algebra::{cascade, single_ended_to_mixed_mode, PortMap};
use viaqual::brv::{extract_brv, match_capacitor_to_brv, BrvOptions};
use viaqual::mc::{sample_cases, McConfig, Range};
use viaqual::network::{linear_grid, SMatrix};
use viaqual::rules::{check_rules, GeometryAudit, RuleReport, RuleSet, RuleStatus, ShiftMeasurement};
use viaqual::synth::{synth_lossy_stripline, synth_shunt_capacitor, synth_thru, LineSpec};
use viaqual::time_domain::{make_pulse, prbs7, through_response, PulseSpec, ResponseOptions};
use viaqual::touchstone::{parse_touchstone, write_touchstone, FrequencyUnit};
use viaqual::{DataFormat, SParameterNetwork};

/// Random matrices scaled to a largest singular value in (0, 1).
fn passive_network(ports: usize, points: usize) -> impl Strategy<Value = SParameterNetwork> {
    let entries = prop::collection::vec(-1.0f64..1.0, 2 * ports * ports * points);
    let scales = prop::collection::vec(0.01f64..0.99, points);
    (entries, scales, 0.0f64..1e9).prop_map(move |(e, s, f0)| {
        let grid: Vec<f64> = (0..points).map(|k| f0 + 1e8 * (k as f64 + 1.0)).collect();
        let mats: Vec<SMatrix> = e
            .chunks(2 * ports * ports)
            .zip(&s)
            .map(|(v, &scale)| {
                let m = DMatrix::from_fn(ports, ports, |i, j| {
                    let k = 2 * (i * ports + j);
                    Complex64::new(v[k], v[k + 1])
                });
                let sigma = m.singular_values().max().max(1e-12);
                m.map(|z| z * (scale / sigma))
            })
            .collect();
        SParameterNetwork::new(ports, grid, mats, 50.0).unwrap()
    })
}

fn any_format() -> impl Strategy<Value = DataFormat> {
    prop_oneof![Just(DataFormat::RI), Just(DataFormat::MA), Just(DataFormat::DB)]
}

/// Reflection curve with cusped humps every 7 GHz on a sloped dB line.
fn hump_curve(grid: &[f64], level_db: f64) -> Vec<f64> {
    grid.iter()
        .map(|&f| {
            let line = level_db + 0.2e-9 * (f - 28e9);
            let cusp = 30.0 * (std::f64::consts::PI * f / 7e9).sin().abs();
            10f64.powf((line - cusp) / 20.0)
        })
        .collect()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn touchstone_round_trip(
        net in (1usize..=4, 1usize..12).prop_flat_map(|(n, p)| passive_network(n, p)),
        format in any_format(),
    ) {
        let text = write_touchstone(&net, format, FrequencyUnit::GHz);
        let back = parse_touchstone(&text, Some(net.port_count)).unwrap();
        for (a, b) in net.s_matrix.iter().zip(&back.s_matrix) {
            for (x, y) in a.iter().zip(b.iter()) {
                // Exact zeros come back at the -400 dB floor in DB format.
                prop_assert!((x - y).norm() <= (1e-12 * x.norm()).max(1e-20));
            }
        }
        // RI values are stored as written, so a second write is byte-identical.
        if format == DataFormat::RI {
            prop_assert_eq!(text, write_touchstone(&back, format, FrequencyUnit::GHz));
        }
    }

    #[test]
    fn cascade_is_associative_with_thru_identity(
        a in passive_network(2, 5),
        b in passive_network(2, 5),
        c in passive_network(2, 5),
    ) {
        let grid = a.frequencies_hz.clone();
        let b = SParameterNetwork { frequencies_hz: grid.clone(), ..b };
        let c = SParameterNetwork { frequencies_hz: grid.clone(), ..c };
        // Keep transmission away from zero so T-parameters exist.
        prop_assume!(a.s21().iter().chain(&b.s21()).chain(&c.s21()).all(|s| s.norm() > 1e-3));
        let left = cascade(&cascade(&a, &b).unwrap(), &c).unwrap();
        let right = cascade(&a, &cascade(&b, &c).unwrap()).unwrap();
        let scale = left.s_matrix.iter().flat_map(|m| m.iter()).map(|z| z.norm()).fold(1.0, f64::max);
        prop_assert!(left.max_abs_diff(&right).unwrap() <= 1e-9 * scale);
        let thru = synth_thru(&grid, 50.0).unwrap();
        prop_assert!(cascade(&thru, &a).unwrap().max_abs_diff(&a).unwrap() <= 1e-12);
    }

    #[test]
    fn cascade_of_passive_networks_is_passive(a in passive_network(2, 4), b in passive_network(2, 4)) {
        let b = SParameterNetwork { frequencies_hz: a.frequencies_hz.clone(), ..b };
        prop_assume!(a.s21().iter().chain(&b.s21()).all(|s| s.norm() > 1e-3));
        let ab = cascade(&a, &b).unwrap();
        for m in &ab.s_matrix {
            prop_assert!(m.singular_values().max() <= 1.0 + 1e-9);
        }
    }

    #[test]
    fn mixed_mode_conserves_power(net in passive_network(4, 3), swap in any::<bool>()) {
        let map = if swap { PortMap { pair_a: (2, 4), pair_b: (1, 3) } } else { PortMap::default() };
        let mm = single_ended_to_mixed_mode(&net, map).unwrap();
        for k in 0..net.len() {
            let total: f64 = [&mm.sdd, &mm.sdc, &mm.scd, &mm.scc]
                .iter()
                .map(|b| b.s_matrix[k].norm_squared())
                .sum();
            prop_assert!((total - net.s_matrix[k].norm_squared()).abs() <= 1e-12);
        }
    }

    #[test]
    fn passive_channels_do_not_add_energy(cap_ff in 0.0f64..800.0, il in 0.0f64..30.0) {
        let grid = linear_grid(0.0, 200e9, 801);
        let pulse = make_pulse(&PulseSpec::default(), 0.5).unwrap();
        let opts = ResponseOptions::default();
        let cap = synth_shunt_capacitor(cap_ff * 1e-15, 50.0, &grid).unwrap();
        let line = synth_lossy_stripline(&LineSpec { il_at_nyquist: il, ..LineSpec::default() }, 50.0, &grid).unwrap();
        for net in [&cap, &line] {
            let out = through_response(net, &pulse, &opts).unwrap();
            prop_assert!(out.energy() <= pulse.energy() * (1.0 + 1e-9));
        }
    }

    #[test]
    fn brv_shifts_with_reflection_scale(level in -35.0f64..-8.0, shift_db in -20.0f64..5.0) {
        let grid: Vec<f64> = (0..=4000).map(|k| k as f64 * 2.5e7).collect();
        let base = hump_curve(&grid, level);
        let k = 10f64.powf(shift_db / 20.0);
        let scaled: Vec<f64> = base.iter().map(|v| v * k).collect();
        let opts = BrvOptions::default();
        let a = extract_brv(&grid, &base, 28e9, &opts).unwrap();
        let b = extract_brv(&grid, &scaled, 28e9, &opts).unwrap();
        prop_assert_eq!(a.method, b.method);
        prop_assert!((a.brv_db_at_nyquist - level).abs() < 1e-9);
        prop_assert!((b.brv_db_at_nyquist - (level + shift_db).min(0.0)).abs() < 1e-9);
    }

    #[test]
    fn matched_capacitor_reproduces_brv(brv in -60.0f64..-0.01, nyquist in 1e9f64..60e9) {
        let c = match_capacitor_to_brv(brv, nyquist, 50.0).unwrap();
        let s11 = synth_shunt_capacitor(c, 50.0, &[nyquist]).unwrap().s11()[0];
        prop_assert!((20.0 * s11.norm().log10() - brv).abs() < 1e-9);
    }

    #[test]
    fn larger_shift_never_improves_the_audit(a in 0.0f64..5.0, b in 0.0f64..5.0, limit in 0.1f64..4.0) {
        let (lo, hi) = if a <= b { (a, b) } else { (b, a) };
        let rules = RuleSet { max_layer_shift_mil: limit, ..RuleSet::default() };
        let audit = |s: f64| GeometryAudit {
            measured_layer_shift_mil: Some(ShiftMeasurement::Max(s)),
            ..GeometryAudit::default()
        };
        let r_lo = check_rules(&audit(lo), &rules).rules[1].clone();
        let r_hi = check_rules(&audit(hi), &rules).rules[1].clone();
        prop_assert!(!(r_lo.status == RuleStatus::Fail && r_hi.status == RuleStatus::Pass));
        prop_assert!(r_hi.margin.unwrap() <= r_lo.margin.unwrap());
        prop_assert_eq!(r_lo.margin.unwrap(), limit - lo);
        prop_assert_eq!(r_lo.status == RuleStatus::Pass, lo <= limit);
    }

    #[test]
    fn rule_report_json_round_trips(shift in 0.0f64..4.0, wick in prop::option::of(0.0f64..2.0)) {
        let audit = GeometryAudit {
            measured_layer_shift_mil: Some(ShiftMeasurement::PerLayer(vec![shift, shift / 2.0])),
            measured_wicking_mil: wick,
            ..GeometryAudit::default()
        };
        let report = check_rules(&audit, &RuleSet::default());
        let text = serde_json::to_string(&report).unwrap();
        let back: RuleReport = serde_json::from_str(&text).unwrap();
        prop_assert_eq!(back, report);
    }

    #[test]
    fn monte_carlo_samples_stay_in_range(seed in any::<u64>(), count in 1usize..50, max_shift in 0.5f64..4.0) {
        let cfg = McConfig {
            master_seed: seed,
            case_count: count,
            layer_shift_mil: Range::uniform(0.0, max_shift),
            ..McConfig::default()
        };
        let cases = sample_cases(&cfg).unwrap();
        prop_assert_eq!(cases.len(), count);
        for c in &cases {
            prop_assert!((0.0..=max_shift).contains(&c.shift_mil));
            prop_assert!((8.0..=10.0).contains(&c.barrel_od_mil));
            prop_assert!((93.0..=107.0).contains(&c.z_diff_ohm));
        }
        prop_assert_eq!(cases, sample_cases(&cfg).unwrap());
    }

    #[test]
    fn prbs7_has_period_127_for_any_seed(seed in 1u8..=127) {
        let bits = prbs7(seed, 254).unwrap();
        prop_assert_eq!(&bits[..127], &bits[127..]);
        prop_assert_eq!(bits[..127].iter().filter(|&&b| b == 1).count(), 64);
    }

    #[test]
    fn pulse_fwhm_matches_width(width in 10.0f64..40.0, edge in 2.0f64..10.0) {
        prop_assume!(width >= edge);
        let spec = PulseSpec { width_ps: width, edge_ps: edge, amplitude_v: 1.0 };
        let p = make_pulse(&spec, edge / 64.0).unwrap();
        prop_assert!((p.fwhm_ps() - width).abs() < edge / 32.0);
        prop_assert!((p.peak() - 1.0).abs() < 1e-12);
    }
}
