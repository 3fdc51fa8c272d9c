//! Touchstone v1 reader/writer and grid resampling.
//!
//! Supported option line: `# <Hz|kHz|MHz|GHz> S <RI|MA|DB> R <ohms>`, tokens in
//! any order, defaults `GHz S MA R 50`. Two-port records use the classic
//! `S11 S21 S12 S22` order; all other port counts are row-major with rows
//! wrapped at four complex values per line. Touchstone v2 keyword files are
//! rejected. Noise-parameter blocks in two-port files are skipped.

use std::fmt::Write as _;
use std::str::FromStr;

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::network::{DataFormat, SMatrix, SParameterNetwork};

/// Frequency unit on the option line.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum FrequencyUnit {
    Hz,
    KHz,
    MHz,
    #[default]
    GHz,
}

impl FrequencyUnit {
    pub fn multiplier(self) -> f64 {
        match self {
            Self::Hz => 1.0,
            Self::KHz => 1e3,
            Self::MHz => 1e6,
            Self::GHz => 1e9,
        }
    }

    pub fn label(self) -> &'static str {
        match self {
            Self::Hz => "Hz",
            Self::KHz => "kHz",
            Self::MHz => "MHz",
            Self::GHz => "GHz",
        }
    }
}

impl FromStr for FrequencyUnit {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_uppercase().as_str() {
            "HZ" => Ok(Self::Hz),
            "KHZ" => Ok(Self::KHz),
            "MHZ" => Ok(Self::MHz),
            "GHZ" => Ok(Self::GHz),
            other => Err(Error::InvalidParameter(format!("unknown frequency unit '{other}'"))),
        }
    }
}

/// Magnitude written for an exact zero in dB format.
const DB_FLOOR: f64 = -400.0;

struct OptionLine {
    unit: FrequencyUnit,
    format: DataFormat,
    reference_ohms: f64,
}

fn parse_option_line(body: &str, line: usize) -> Result<OptionLine> {
    let err = |message: String| Error::Touchstone { line, message };
    let mut opt = OptionLine {
        unit: FrequencyUnit::GHz,
        format: DataFormat::MA,
        reference_ohms: 50.0,
    };
    let mut tokens = body.split_whitespace();
    while let Some(tok) = tokens.next() {
        match tok.to_ascii_uppercase().as_str() {
            "HZ" | "KHZ" | "MHZ" | "GHZ" => opt.unit = tok.parse()?,
            "S" => {}
            "Y" | "Z" | "H" | "G" => {
                return Err(err(format!(
                    "parameter type '{tok}' is not supported (only S)"
                )))
            }
            "RI" | "MA" | "DB" => opt.format = tok.parse()?,
            "R" => {
                let value = tokens
                    .next()
                    .ok_or_else(|| err("option 'R' requires a value".into()))?;
                opt.reference_ohms = value
                    .parse::<f64>()
                    .ok()
                    .filter(|r| *r > 0.0 && r.is_finite())
                    .ok_or_else(|| err(format!("invalid reference impedance '{value}'")))?;
            }
            _ => return Err(err(format!("malformed option line: unexpected token '{tok}'"))),
        }
    }
    Ok(opt)
}

fn pair_to_complex(a: f64, b: f64, format: DataFormat) -> Complex64 {
    match format {
        DataFormat::RI => Complex64::new(a, b),
        DataFormat::MA => Complex64::from_polar(a, b.to_radians()),
        DataFormat::DB => Complex64::from_polar(10f64.powf(a / 20.0), b.to_radians()),
    }
}

fn complex_to_pair(z: Complex64, format: DataFormat) -> (f64, f64) {
    match format {
        DataFormat::RI => (z.re, z.im),
        DataFormat::MA => (z.norm(), z.arg().to_degrees()),
        DataFormat::DB => {
            let mag = z.norm();
            let db = if mag > 0.0 { 20.0 * mag.log10() } else { DB_FLOOR };
            (db, z.arg().to_degrees())
        }
    }
}

/// Matrix position of the k-th complex value in a record.
fn record_position(k: usize, n: usize) -> (usize, usize) {
    if n == 2 {
        // S11 S21 S12 S22
        (k % 2, k / 2)
    } else {
        (k / n, k % n)
    }
}

struct Record {
    line: usize,
    values: Vec<f64>,
}

/// Parses Touchstone v1 text. `port_count_hint` (usually from the file
/// extension) is checked against the record layout when given.
pub fn parse_touchstone(text: &str, port_count_hint: Option<usize>) -> Result<SParameterNetwork> {
    let mut comments = Vec::new();
    let mut option: Option<OptionLine> = None;
    let mut records: Vec<Record> = Vec::new();

    for (idx, raw) in text.lines().enumerate() {
        let line = idx + 1;
        let (body, comment) = match raw.find('!') {
            Some(pos) => (&raw[..pos], Some(raw[pos + 1..].trim_end())),
            None => (raw, None),
        };
        if let Some(c) = comment {
            comments.push(c.strip_prefix(' ').unwrap_or(c).to_string());
        }
        let body = body.trim();
        if body.is_empty() {
            continue;
        }
        if body.starts_with('[') {
            return Err(Error::Touchstone {
                line,
                message: format!(
                    "keyword '{}' indicates a Touchstone v2 file; only v1 is supported",
                    body.split_whitespace().next().unwrap_or(body)
                ),
            });
        }
        if let Some(rest) = body.strip_prefix('#') {
            if option.is_none() {
                option = Some(parse_option_line(rest, line)?);
            } else {
                log::warn!("line {line}: additional option line ignored");
            }
            continue;
        }
        let values = body
            .split_whitespace()
            .map(|t| {
                t.parse::<f64>().map_err(|_| Error::Touchstone {
                    line,
                    message: format!("invalid number '{t}'"),
                })
            })
            .collect::<Result<Vec<_>>>()?;
        // A record starts on a line with an odd token count (frequency plus
        // value pairs); wrapped continuation lines carry only pairs.
        if values.len() % 2 == 1 || records.is_empty() {
            records.push(Record { line, values });
        } else {
            records.last_mut().expect("non-empty").values.extend(values);
        }
    }

    let option = option.unwrap_or(OptionLine {
        unit: FrequencyUnit::GHz,
        format: DataFormat::MA,
        reference_ohms: 50.0,
    });

    let first = records.first().ok_or_else(|| Error::Touchstone {
        line: text.lines().count().max(1),
        message: "no network data".into(),
    })?;
    let port_count = match port_count_hint {
        Some(n) if n >= 1 => n,
        Some(_) => return Err(Error::InvalidParameter("port count hint must be >= 1".into())),
        None => {
            let pairs = (first.values.len().saturating_sub(1)) / 2;
            let n = (pairs as f64).sqrt().round() as usize;
            if n == 0 || n * n != pairs || first.values.len() % 2 == 0 {
                return Err(Error::Touchstone {
                    line: first.line,
                    message: format!(
                        "cannot infer port count from {} values",
                        first.values.len()
                    ),
                });
            }
            n
        }
    };
    let expected = 1 + 2 * port_count * port_count;

    let mut freqs = Vec::with_capacity(records.len());
    let mut mats = Vec::with_capacity(records.len());
    for rec in &records {
        let f = rec.values[0] * option.unit.multiplier();
        if let Some(&last) = freqs.last() {
            if f <= last {
                if port_count == 2 && rec.values.len() == 5 {
                    log::warn!(
                        "line {}: noise parameter data ignored",
                        rec.line
                    );
                    break;
                }
                return Err(Error::Touchstone {
                    line: rec.line,
                    message: format!("frequency {} not above previous {}", rec.values[0], last / option.unit.multiplier()),
                });
            }
        }
        if rec.values.len() != expected {
            return Err(Error::Touchstone {
                line: rec.line,
                message: format!(
                    "expected {expected} values for a {port_count}-port record, found {}",
                    rec.values.len()
                ),
            });
        }
        if !(f >= 0.0) {
            return Err(Error::Touchstone {
                line: rec.line,
                message: format!("negative frequency {}", rec.values[0]),
            });
        }
        let mut m = SMatrix::zeros(port_count, port_count);
        for (k, pair) in rec.values[1..].chunks_exact(2).enumerate() {
            let z = pair_to_complex(pair[0], pair[1], option.format);
            if !z.re.is_finite() || !z.im.is_finite() {
                return Err(Error::Touchstone {
                    line: rec.line,
                    message: "non-finite parameter value".into(),
                });
            }
            m[record_position(k, port_count)] = z;
        }
        freqs.push(f);
        mats.push(m);
    }

    let mut net = SParameterNetwork::new(port_count, freqs, mats, option.reference_ohms)?;
    net.source_format = option.format;
    net.comments = comments;
    Ok(net)
}

/// Serializes a network as Touchstone v1. Numbers use the shortest
/// representation that reads back to the same `f64`.
pub fn write_touchstone(net: &SParameterNetwork, format: DataFormat, unit: FrequencyUnit) -> String {
    let mut out = String::new();
    for c in &net.comments {
        let _ = writeln!(out, "! {c}");
    }
    let fmt_label = match format {
        DataFormat::RI => "RI",
        DataFormat::MA => "MA",
        DataFormat::DB => "DB",
    };
    let _ = writeln!(
        out,
        "# {} S {} R {}",
        unit.label(),
        fmt_label,
        net.reference_ohms
    );
    let n = net.port_count;
    for (f, m) in net.frequencies_hz.iter().zip(&net.s_matrix) {
        let _ = write!(out, "{:e}", f / unit.multiplier());
        let values: Vec<Complex64> = (0..n * n).map(|k| m[record_position(k, n)]).collect();
        if n <= 2 {
            for z in &values {
                let (a, b) = complex_to_pair(*z, format);
                let _ = write!(out, " {a:e} {b:e}");
            }
            out.push('\n');
        } else {
            for (row_idx, row) in values.chunks(n).enumerate() {
                for (k, chunk) in row.chunks(4).enumerate() {
                    if row_idx > 0 || k > 0 {
                        out.push_str("   ");
                    }
                    for z in chunk {
                        let (a, b) = complex_to_pair(*z, format);
                        let _ = write!(out, " {a:e} {b:e}");
                    }
                    out.push('\n');
                }
            }
        }
    }
    out
}

/// Linear interpolation of one complex trace at `f`.
///
/// Below the lowest sample, `extrapolate_dc` inserts S(0) = Re(S(f_min)).
pub fn interp_trace(
    freqs: &[f64],
    values: &[Complex64],
    f: f64,
    extrapolate_dc: bool,
) -> Result<Complex64> {
    let (&f_lo, &f_hi) = match (freqs.first(), freqs.last()) {
        (Some(a), Some(b)) => (a, b),
        _ => return Err(Error::InvalidNetwork("empty frequency grid".into())),
    };
    if f > f_hi {
        if f - f_hi <= 1e-12 * f_hi {
            return Ok(*values.last().expect("non-empty"));
        }
        return Err(Error::Extrapolation {
            requested_hz: f,
            max_hz: f_hi,
        });
    }
    if f < f_lo {
        if !extrapolate_dc || f < 0.0 {
            return Err(Error::Extrapolation {
                requested_hz: f,
                max_hz: f_hi,
            });
        }
        let dc = Complex64::new(values[0].re, 0.0);
        let t = f / f_lo;
        return Ok(dc + (values[0] - dc) * t);
    }
    let i = freqs.partition_point(|&x| x < f);
    if freqs[i] == f {
        return Ok(values[i]);
    }
    let (fa, fb) = (freqs[i - 1], freqs[i]);
    let t = (f - fa) / (fb - fa);
    Ok(values[i - 1] + (values[i] - values[i - 1]) * t)
}

/// Re-grids a network by independent linear interpolation of the real and
/// imaginary part of every entry.
pub fn resample(
    net: &SParameterNetwork,
    grid: &[f64],
    extrapolate_dc: bool,
) -> Result<SParameterNetwork> {
    let n = net.port_count;
    let traces: Vec<Vec<Complex64>> = (0..n * n).map(|k| net.trace(k / n, k % n)).collect();
    let mut mats = Vec::with_capacity(grid.len());
    for &f in grid {
        let mut m = SMatrix::zeros(n, n);
        for (k, tr) in traces.iter().enumerate() {
            m[(k / n, k % n)] = interp_trace(&net.frequencies_hz, tr, f, extrapolate_dc)?;
        }
        mats.push(m);
    }
    let mut out = SParameterNetwork::new(n, grid.to_vec(), mats, net.reference_ohms)?;
    out.source_format = net.source_format;
    out.comments = net.comments.clone();
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    #[test]
    fn parses_identity_thru_ri() {
        let net = parse_touchstone("# GHz S RI R 50\n1.0 0.0 0.0 1.0 0.0 1.0 0.0 0.0 0.0\n", None)
            .unwrap();
        assert_eq!(net.port_count, 2);
        assert_eq!(net.frequencies_hz, vec![1e9]);
        assert_eq!(net.s_matrix[0][(1, 0)], c(1.0, 0.0));
        assert_eq!(net.s_matrix[0][(0, 0)], c(0.0, 0.0));
    }

    #[test]
    fn ma_polar_to_rect() {
        let net = parse_touchstone("# Hz S MA R 50\n100 0.5 180\n", None).unwrap();
        let z = net.s_matrix[0][(0, 0)];
        assert!((z - c(-0.5, 0.0)).norm() < 1e-15);
    }

    #[test]
    fn two_port_column_order() {
        let net = parse_touchstone("# GHz S RI R 50\n1 11 0 21 0 12 0 22 0\n", Some(2)).unwrap();
        let m = &net.s_matrix[0];
        assert_eq!(m[(0, 0)].re, 11.0);
        assert_eq!(m[(1, 0)].re, 21.0);
        assert_eq!(m[(0, 1)].re, 12.0);
        assert_eq!(m[(1, 1)].re, 22.0);
    }

    #[test]
    fn four_port_wrapped_rows() {
        let mut text = String::from("! four port\n# MHz S RI R 50\n");
        for f in [100, 200] {
            text.push_str(&format!("{f}"));
            for r in 0..4 {
                for col in 0..4 {
                    text.push_str(&format!(" {}.{} 0", r + 1, col + 1));
                }
                text.push('\n');
            }
        }
        let net = parse_touchstone(&text, None).unwrap();
        assert_eq!(net.port_count, 4);
        assert_eq!(net.frequencies_hz, vec![100e6, 200e6]);
        assert!((net.s_matrix[1][(2, 3)].re - 3.4).abs() < 1e-12);
        assert_eq!(net.comments, vec!["four port".to_string()]);
    }

    #[test]
    fn rejects_non_monotonic_with_line_number() {
        let err = parse_touchstone("# GHz S RI R 50\n2 0 0\n1 0 0\n", None).unwrap_err();
        match err {
            Error::Touchstone { line, .. } => assert_eq!(line, 3),
            e => panic!("unexpected {e}"),
        }
    }

    #[test]
    fn rejects_wrong_value_count() {
        let err = parse_touchstone("# GHz S RI R 50\n1 0 0 1 0 1 0 0 0\n2 0 0 1 0 1 0\n", None)
            .unwrap_err();
        match err {
            Error::Touchstone { line, .. } => assert_eq!(line, 3),
            e => panic!("unexpected {e}"),
        }
    }

    #[test]
    fn rejects_other_parameter_types() {
        let err = parse_touchstone("# GHz Z RI R 50\n1 0 0\n", None).unwrap_err();
        assert!(matches!(err, Error::Touchstone { line: 1, .. }));
    }

    #[test]
    fn rejects_malformed_option_line() {
        assert!(parse_touchstone("# GHz S RI R\n1 0 0\n", None).is_err());
        assert!(parse_touchstone("# GHz S XY R 50\n1 0 0\n", None).is_err());
    }

    #[test]
    fn rejects_version_two() {
        let err = parse_touchstone("[Version] 2.0\n# GHz S RI R 50\n", None).unwrap_err();
        assert!(err.to_string().contains("v2"));
    }

    #[test]
    fn skips_noise_block() {
        let text = "# GHz S RI R 50\n1 0 0 1 0 1 0 0 0\n2 0 0 1 0 1 0 0 0\n1 1.2 0.5 30 0.3\n";
        let net = parse_touchstone(text, Some(2)).unwrap();
        assert_eq!(net.len(), 2);
    }

    #[test]
    fn hint_mismatch_reports_count() {
        assert!(parse_touchstone("# GHz S RI R 50\n1 0 0\n", Some(2)).is_err());
    }

    #[test]
    fn write_thru_ri() {
        let net = SParameterNetwork::two_port_from_fn(&[1e9], 50.0, |_| {
            [c(0.0, 0.0), c(1.0, 0.0), c(1.0, 0.0), c(0.0, 0.0)]
        })
        .unwrap();
        let text = write_touchstone(&net, DataFormat::RI, FrequencyUnit::GHz);
        let data: Vec<f64> = text
            .lines()
            .last()
            .unwrap()
            .split_whitespace()
            .map(|t| t.parse().unwrap())
            .collect();
        assert_eq!(data, vec![1.0, 0.0, 0.0, 1.0, 0.0, 1.0, 0.0, 0.0, 0.0]);
    }

    #[test]
    fn write_db_field() {
        let net = SParameterNetwork::new(1, vec![1e9], vec![SMatrix::from_element(1, 1, c(0.1, 0.0))], 50.0)
            .unwrap();
        let text = write_touchstone(&net, DataFormat::DB, FrequencyUnit::GHz);
        let db: f64 = text.lines().last().unwrap().split_whitespace().nth(1).unwrap().parse().unwrap();
        assert!((db + 20.0).abs() < 1e-12);
    }

    #[test]
    fn resample_identical_grid_is_identity() {
        let grid = [1e9, 2e9, 3e9];
        let net = SParameterNetwork::two_port_from_fn(&grid, 50.0, |f| {
            let x = f / 1e9;
            [c(0.1 * x, 0.0), c(0.9, -0.1 * x), c(0.9, -0.1 * x), c(0.0, 0.2)]
        })
        .unwrap();
        assert_eq!(resample(&net, &grid, false).unwrap(), net);
    }

    #[test]
    fn resample_midpoint() {
        let net = SParameterNetwork::new(
            1,
            vec![1e9, 3e9],
            vec![
                SMatrix::from_element(1, 1, c(0.0, 0.0)),
                SMatrix::from_element(1, 1, c(0.2, 0.0)),
            ],
            50.0,
        )
        .unwrap();
        let r = resample(&net, &[2e9], false).unwrap();
        assert!((r.s_matrix[0][(0, 0)] - c(0.1, 0.0)).norm() < 1e-15);
    }

    #[test]
    fn resample_constant_network() {
        let grid = [1e9, 5e9, 9e9];
        let net = SParameterNetwork::two_port_from_fn(&grid, 50.0, |_| {
            [c(0.1, 0.2), c(0.7, -0.3), c(0.7, -0.3), c(-0.1, 0.0)]
        })
        .unwrap();
        let r = resample(&net, &[1.5e9, 4.2e9, 8.9e9], false).unwrap();
        for m in &r.s_matrix {
            assert!((m - &net.s_matrix[0]).norm() < 1e-15);
        }
    }

    #[test]
    fn resample_refuses_extrapolation() {
        let net = SParameterNetwork::new(1, vec![1e9, 2e9], vec![SMatrix::zeros(1, 1); 2], 50.0).unwrap();
        assert!(matches!(
            resample(&net, &[3e9], true),
            Err(Error::Extrapolation { .. })
        ));
        assert!(resample(&net, &[0.5e9], false).is_err());
    }

    #[test]
    fn dc_extrapolation_uses_real_part() {
        let net = SParameterNetwork::new(
            1,
            vec![1e9, 2e9],
            vec![SMatrix::from_element(1, 1, c(0.4, 0.3)); 2],
            50.0,
        )
        .unwrap();
        let r = resample(&net, &[0.0, 0.5e9], true).unwrap();
        assert_eq!(r.s_matrix[0][(0, 0)], c(0.4, 0.0));
        assert!((r.s_matrix[1][(0, 0)] - c(0.4, 0.15)).norm() < 1e-15);
    }
}
