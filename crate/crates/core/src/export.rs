//! CSV tables and minimal SVG line plots. Numbers use the shortest
//! round-trip representation so output is byte-stable.

use std::fmt::Write as _;

use crate::brv::BrvResult;
use crate::mc::{Histogram, McResult, ShiftComparison};
use crate::network::{db, SParameterNetwork};
use crate::time_domain::{EyeDiagram, Waveform};

fn table(header: &[&str], rows: impl Iterator<Item = Vec<f64>>) -> String {
    let mut s = header.join(",");
    s.push('\n');
    for row in rows {
        let cells: Vec<String> = row.iter().map(|v| format!("{v}")).collect();
        s.push_str(&cells.join(","));
        s.push('\n');
    }
    s
}

pub fn waveform_csv(w: &Waveform, value_name: &str) -> String {
    table(
        &["t_ps", value_name],
        w.samples.iter().enumerate().map(|(i, &v)| vec![w.time_ps(i), v]),
    )
}

pub fn eye_csv(eye: &EyeDiagram) -> String {
    let p = eye.samples_per_ui as f64;
    table(
        &["phase_ui", "upper_inner_v", "lower_inner_v", "opening_v"],
        (0..eye.samples_per_ui).map(|j| {
            vec![j as f64 / p, eye.upper[j], eye.lower[j], eye.upper[j] - eye.lower[j]]
        }),
    )
}

/// Magnitude in dB of every S-parameter entry.
pub fn network_db_csv(net: &SParameterNetwork) -> String {
    let n = net.port_count;
    let names: Vec<String> = (0..n * n).map(|k| format!("s{}{}_db", k / n + 1, k % n + 1)).collect();
    let mut header = vec!["freq_hz"];
    header.extend(names.iter().map(String::as_str));
    table(
        &header,
        net.frequencies_hz.iter().zip(&net.s_matrix).map(|(&f, m)| {
            std::iter::once(f)
                .chain((0..n * n).map(|k| db(m[(k / n, k % n)])))
                .collect()
        }),
    )
}

pub fn brv_csv(freqs: &[f64], reflection_db: &[f64], brv: &BrvResult) -> String {
    table(
        &["freq_hz", "s11_db", "line_db"],
        freqs
            .iter()
            .zip(reflection_db)
            .map(|(&f, &v)| vec![f, v, brv.line_at(f)]),
    )
}

pub fn mc_cases_csv(r: &McResult) -> String {
    let mut s = String::from(
        "case_id,seed,shift_mil,barrel_od_mil,z_diff_ohm,etch_delta_mil,closure_mv_ui\n",
    );
    let nominal = std::iter::once(("nominal".to_string(), &r.nominal));
    let cases = r.per_case.iter().map(|c| (c.params.case_id.to_string(), c));
    for (id, c) in nominal.chain(cases) {
        let p = &c.params;
        let _ = writeln!(
            s,
            "{id},{},{},{},{},{},{}",
            p.seed, p.shift_mil, p.barrel_od_mil, p.z_diff_ohm, p.etch_delta_mil, c.closure_mv_ui
        );
    }
    s
}

pub fn histogram_csv(h: &Histogram) -> String {
    table(
        &["bin_lo", "bin_hi", "count"],
        h.counts
            .iter()
            .enumerate()
            .map(|(i, &c)| vec![h.edges[i], h.edges[i + 1], c as f64]),
    )
}

pub fn comparison_csv(c: &ShiftComparison) -> String {
    table(
        &["bin_lo", "bin_hi", "baseline_count", "rerun_count"],
        (0..c.baseline_counts.len()).map(|i| {
            vec![
                c.edges[i],
                c.edges[i + 1],
                c.baseline_counts[i] as f64,
                c.rerun_counts[i] as f64,
            ]
        }),
    )
}

/// One named polyline.
pub struct Series<'a> {
    pub name: &'a str,
    pub points: Vec<(f64, f64)>,
}

const PALETTE: [&str; 6] = ["#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#17becf"];

/// Static line plot with axis ranges fitted to the data.
pub fn svg_plot(title: &str, x_label: &str, y_label: &str, series: &[Series<'_>]) -> String {
    let (w, h, m) = (640.0, 400.0, 50.0);
    let all = series.iter().flat_map(|s| s.points.iter()).filter(|p| p.0.is_finite() && p.1.is_finite());
    let (mut x0, mut x1, mut y0, mut y1) = (f64::INFINITY, f64::NEG_INFINITY, f64::INFINITY, f64::NEG_INFINITY);
    for &(x, y) in all {
        x0 = x0.min(x);
        x1 = x1.max(x);
        y0 = y0.min(y);
        y1 = y1.max(y);
    }
    if !(x1 > x0) {
        x1 = x0 + 1.0;
    }
    if !(y1 > y0) {
        y1 = y0 + 1.0;
    }
    let sx = |x: f64| m + (x - x0) / (x1 - x0) * (w - 2.0 * m);
    let sy = |y: f64| h - m - (y - y0) / (y1 - y0) * (h - 2.0 * m);
    let mut s = String::new();
    let _ = writeln!(
        s,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{w}" height="{h}" viewBox="0 0 {w} {h}" font-family="sans-serif" font-size="12">"#
    );
    let _ = writeln!(s, r#"<rect width="{w}" height="{h}" fill="white"/>"#);
    let _ = writeln!(
        s,
        r#"<rect x="{m}" y="{m}" width="{}" height="{}" fill="none" stroke="black"/>"#,
        w - 2.0 * m,
        h - 2.0 * m
    );
    let _ = writeln!(s, r#"<text x="{}" y="30" text-anchor="middle">{}</text>"#, w / 2.0, escape(title));
    let _ = writeln!(s, r#"<text x="{}" y="{}" text-anchor="middle">{}</text>"#, w / 2.0, h - 12.0, escape(x_label));
    let _ = writeln!(
        s,
        r#"<text x="14" y="{}" text-anchor="middle" transform="rotate(-90 14 {})">{}</text>"#,
        h / 2.0,
        h / 2.0,
        escape(y_label)
    );
    let _ = writeln!(s, r#"<text x="{m}" y="{}" text-anchor="start">{x0:.4}</text>"#, h - m + 15.0);
    let _ = writeln!(s, r#"<text x="{}" y="{}" text-anchor="end">{x1:.4}</text>"#, w - m, h - m + 15.0);
    let _ = writeln!(s, r#"<text x="{}" y="{}" text-anchor="end">{y0:.4}</text>"#, m - 4.0, h - m);
    let _ = writeln!(s, r#"<text x="{}" y="{}" text-anchor="end">{y1:.4}</text>"#, m - 4.0, m + 10.0);
    for (i, ser) in series.iter().enumerate() {
        let color = PALETTE[i % PALETTE.len()];
        let pts: Vec<String> = ser
            .points
            .iter()
            .filter(|p| p.0.is_finite() && p.1.is_finite())
            .map(|&(x, y)| format!("{:.2},{:.2}", sx(x), sy(y)))
            .collect();
        let _ = writeln!(
            s,
            r#"<polyline fill="none" stroke="{color}" stroke-width="1.2" points="{}"/>"#,
            pts.join(" ")
        );
        let _ = writeln!(
            s,
            r#"<text x="{}" y="{}" fill="{color}">{}</text>"#,
            m + 8.0,
            m + 16.0 + 14.0 * i as f64,
            escape(ser.name)
        );
    }
    s.push_str("</svg>\n");
    s
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

/// Eye traces (one polyline per bit) plus the inner contours.
pub fn eye_svg(eye: &EyeDiagram, title: &str) -> String {
    let p = eye.samples_per_ui;
    let phase = |j: usize| j as f64 / p as f64;
    let mut series: Vec<Series<'_>> = eye
        .waveform
        .chunks_exact(p)
        .map(|w| Series {
            name: "",
            points: w.iter().enumerate().map(|(j, &v)| (phase(j), v)).collect(),
        })
        .collect();
    series.push(Series {
        name: "upper inner",
        points: eye.upper.iter().enumerate().map(|(j, &v)| (phase(j), v)).collect(),
    });
    series.push(Series {
        name: "lower inner",
        points: eye.lower.iter().enumerate().map(|(j, &v)| (phase(j), v)).collect(),
    });
    svg_plot(title, "phase (UI)", "V", &series)
}
