use std::path::Path;
use std::process::{Command, Output};

use tempfile::TempDir;

fn viaqual(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_viaqual"))
        .arg("--out-dir")
        .arg(dir)
        .args(args)
        .output()
        .expect("binary runs")
}

fn read(dir: &Path, name: &str) -> String {
    std::fs::read_to_string(dir.join(name)).unwrap_or_else(|e| panic!("{name}: {e}"))
}

#[test]
fn synthesized_cap_reports_its_brv() {
    let dir = TempDir::new().unwrap();
    let d = dir.path();
    let out = viaqual(d, &["synth-cap", "--c-ff", "100", "--out", "cap.s2p"]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let cap = d.join("cap.s2p");
    let out = viaqual(d, &["brv", "--in", cap.to_str().unwrap(), "--csv", "brv.csv"]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let json: serde_json::Value = serde_json::from_str(&read(d, "brv.json")).unwrap();
    let brv = json["brv_db_at_nyquist"].as_f64().unwrap();
    // 100 fF against 50 ohm at 28 GHz.
    let x = 2.0 * std::f64::consts::PI * 28e9 * 100e-15 * 50.0;
    let expected = 20.0 * (x / (4.0 + x * x).sqrt()).log10();
    assert!((brv - expected).abs() < 0.05, "{brv} vs {expected}");
    assert!(read(d, "brv.csv").starts_with("freq_hz,s11_db,line_db\n"));
}

#[test]
fn convert_round_trips_through_every_format() {
    let dir = TempDir::new().unwrap();
    let d = dir.path();
    assert!(viaqual(d, &["synth-line", "--points", "51", "--out", "line.s2p"]).status.success());
    let src = d.join("line.s2p");
    for fmt in ["MA", "DB", "RI"] {
        let name = format!("line_{fmt}.s2p");
        let out = viaqual(
            d,
            &["convert", "--in", src.to_str().unwrap(), "--out", &name, "--format", fmt, "--unit", "MHz"],
        );
        assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
        let back = d.join(&name);
        let again = format!("again_{fmt}.s2p");
        let out = viaqual(d, &["convert", "--in", back.to_str().unwrap(), "--out", &again]);
        assert!(out.status.success());
        let a = viaqual::touchstone::parse_touchstone(&read(d, "line.s2p"), Some(2)).unwrap();
        let b = viaqual::touchstone::parse_touchstone(&read(d, &again), Some(2)).unwrap();
        assert!(a.max_abs_diff(&b).unwrap() < 1e-12, "{fmt}");
    }
}

#[test]
fn ports_flag_overrides_extension() {
    let dir = TempDir::new().unwrap();
    let d = dir.path();
    let src = d.join("thru.txt");
    std::fs::write(&src, "# GHz S RI R 50\n1 0 0 1 0 1 0 0 0\n").unwrap();
    let s = src.to_str().unwrap();
    assert!(viaqual(d, &["convert", "--in", s, "--ports", "2", "--out", "thru.s2p"]).status.success());
    assert!(read(d, "thru.s2p").contains("1e0 0e0 0e0 1e0 0e0 1e0 0e0 0e0 0e0"));
    assert_eq!(viaqual(d, &["convert", "--in", s, "--ports", "1", "--out", "x.s1p"]).status.code(), Some(1));
}

#[test]
fn failing_audit_exits_one() {
    let dir = TempDir::new().unwrap();
    let d = dir.path();
    let audit = d.join("audit.json");
    std::fs::write(
        &audit,
        r#"{"pads":[{"layer":"L1","designed_pad_mil":16,"measured_pad_mil":24}],
            "measured_layer_shift_mil":1.5,"measured_wicking_mil":0.5}"#,
    )
    .unwrap();
    let out = viaqual(d, &["check-rules", "--audit", audit.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(1));
    let text = String::from_utf8_lossy(&out.stdout);
    assert!(text.contains("rule 1 (pad diameter unchanged): FAIL"), "{text}");
    let report: viaqual::rules::RuleReport = serde_json::from_str(&read(d, "rules_report.json")).unwrap();
    assert!(!report.overall_pass);
}

#[test]
fn usage_and_domain_errors_have_distinct_codes() {
    let dir = TempDir::new().unwrap();
    let d = dir.path();
    assert_eq!(viaqual(d, &["no-such-command"]).status.code(), Some(2));
    assert_eq!(viaqual(d, &["synth-cap"]).status.code(), Some(2));
    let missing = d.join("missing.s2p");
    assert_eq!(viaqual(d, &["tdr", "--in", missing.to_str().unwrap()]).status.code(), Some(1));
    assert_eq!(viaqual(d, &["synth-cap", "--c-ff=-3"]).status.code(), Some(1));
}

#[test]
fn outputs_cannot_escape_out_dir() {
    let dir = TempDir::new().unwrap();
    let inner = dir.path().join("inner");
    std::fs::create_dir(&inner).unwrap();
    let out = viaqual(&inner, &["fab-notes", "--out", "../escaped.txt"]);
    assert_eq!(out.status.code(), Some(1));
    assert!(!dir.path().join("escaped.txt").exists());
}

#[test]
fn fab_notes_are_byte_stable() {
    let dir = TempDir::new().unwrap();
    let d = dir.path();
    let rules = d.join("rules.json");
    std::fs::write(
        &rules,
        r#"{"max_layer_shift_mil":2.5,"extra_rules":[{"name":"Drill wander","limit":1.5,"unit":"mil"}]}"#,
    )
    .unwrap();
    for name in ["a.txt", "b.txt"] {
        let out = viaqual(d, &["fab-notes", "--rules", rules.to_str().unwrap(), "--out", name]);
        assert!(out.status.success());
    }
    let a = read(d, "a.txt");
    assert_eq!(a, read(d, "b.txt"));
    assert!(a.contains("2. Layer shifting shall not exceed 2.5 mil from the drilled via center.\n"));
    assert!(a.ends_with("4. Drill wander shall not exceed 1.5 mil.\n"));
}

#[test]
fn monte_carlo_output_is_independent_of_job_count() {
    let dir = TempDir::new().unwrap();
    let d = dir.path();
    let cfg = d.join("mc.json");
    std::fs::write(&cfg, r#"{"case_count":4,"master_seed":7}"#).unwrap();
    for (jobs, prefix) in [("1", "one"), ("3", "three")] {
        let out = viaqual(
            d,
            &["--jobs", jobs, "mc", "--config", cfg.to_str().unwrap(), "--out", prefix],
        );
        assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    }
    assert_eq!(read(d, "one.json"), read(d, "three.json"));
    assert_eq!(read(d, "one_cases.csv"), read(d, "three_cases.csv"));
    let cases = read(d, "one_cases.csv");
    assert_eq!(cases.lines().count(), 1 + 1 + 4, "{cases}");
}

#[test]
fn tdr_and_eye_write_their_tables() {
    let dir = TempDir::new().unwrap();
    let d = dir.path();
    assert!(viaqual(d, &["synth-via", "--f-stop", "200e9", "--points", "801", "--summary", "via.json"])
        .status
        .success());
    let via = d.join("via.s2p");
    let out = viaqual(d, &["tdr", "--in", via.to_str().unwrap(), "--svg"]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    assert!(read(d, "tdr.csv").starts_with("t_ps,"));
    assert!(read(d, "tdr.svg").starts_with("<svg"));
    let out = viaqual(d, &["eye", "--in", via.to_str().unwrap(), "--ffe"]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let eye: serde_json::Value = serde_json::from_str(&read(d, "eye.json")).unwrap();
    assert!(eye.is_object());
    assert!(read(d, "via.json").contains("segments"));
}
