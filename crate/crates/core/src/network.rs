//! N-port scattering-parameter data on a frequency grid.

use nalgebra::DMatrix;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Complex S-matrix at one frequency.
pub type SMatrix = DMatrix<Complex64>;

/// Number format a network was read from (or should be written in).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "UPPERCASE")]
pub enum DataFormat {
    #[default]
    RI,
    MA,
    DB,
}

impl std::str::FromStr for DataFormat {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_uppercase().as_str() {
            "RI" => Ok(Self::RI),
            "MA" => Ok(Self::MA),
            "DB" => Ok(Self::DB),
            other => Err(Error::InvalidParameter(format!("unknown data format '{other}'"))),
        }
    }
}

/// Scattering data for an N-port network.
#[derive(Debug, Clone, PartialEq)]
pub struct SParameterNetwork {
    pub port_count: usize,
    /// Strictly increasing; a DC point (0 Hz) is allowed.
    pub frequencies_hz: Vec<f64>,
    /// One `port_count x port_count` matrix per frequency.
    pub s_matrix: Vec<SMatrix>,
    pub reference_ohms: f64,
    pub source_format: DataFormat,
    pub comments: Vec<String>,
}

impl SParameterNetwork {
    /// Builds and validates a network.
    pub fn new(
        port_count: usize,
        frequencies_hz: Vec<f64>,
        s_matrix: Vec<SMatrix>,
        reference_ohms: f64,
    ) -> Result<Self> {
        let net = Self {
            port_count,
            frequencies_hz,
            s_matrix,
            reference_ohms,
            source_format: DataFormat::RI,
            comments: Vec::new(),
        };
        net.validate()?;
        Ok(net)
    }

    /// Builds a 2-port from per-frequency closures of (S11, S21, S12, S22).
    pub fn two_port_from_fn<F>(grid: &[f64], reference_ohms: f64, mut f: F) -> Result<Self>
    where
        F: FnMut(f64) -> [Complex64; 4],
    {
        let mats = grid
            .iter()
            .map(|&hz| {
                let [s11, s21, s12, s22] = f(hz);
                SMatrix::from_row_slice(2, 2, &[s11, s12, s21, s22])
            })
            .collect();
        Self::new(2, grid.to_vec(), mats, reference_ohms)
    }

    pub fn validate(&self) -> Result<()> {
        if self.port_count == 0 {
            return Err(Error::InvalidNetwork("port count must be >= 1".into()));
        }
        if !(self.reference_ohms > 0.0 && self.reference_ohms.is_finite()) {
            return Err(Error::InvalidNetwork(format!(
                "reference impedance {} must be positive",
                self.reference_ohms
            )));
        }
        if self.frequencies_hz.len() != self.s_matrix.len() {
            return Err(Error::InvalidNetwork(format!(
                "{} frequencies but {} matrices",
                self.frequencies_hz.len(),
                self.s_matrix.len()
            )));
        }
        for w in self.frequencies_hz.windows(2) {
            if !(w[1] > w[0]) {
                return Err(Error::InvalidNetwork(format!(
                    "frequencies not strictly increasing at {} Hz",
                    w[1]
                )));
            }
        }
        if let Some(&f0) = self.frequencies_hz.first() {
            if !(f0 >= 0.0) || !f0.is_finite() {
                return Err(Error::InvalidNetwork(format!("invalid frequency {f0}")));
            }
        }
        for (f, m) in self.frequencies_hz.iter().zip(&self.s_matrix) {
            if m.nrows() != self.port_count || m.ncols() != self.port_count {
                return Err(Error::InvalidNetwork(format!(
                    "matrix at {f} Hz is {}x{}, expected {}x{}",
                    m.nrows(),
                    m.ncols(),
                    self.port_count,
                    self.port_count
                )));
            }
            if m.iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
                return Err(Error::InvalidNetwork(format!("non-finite entry at {f} Hz")));
            }
        }
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.frequencies_hz.len()
    }

    pub fn is_empty(&self) -> bool {
        self.frequencies_hz.is_empty()
    }

    pub fn f_max(&self) -> f64 {
        self.frequencies_hz.last().copied().unwrap_or(0.0)
    }

    /// Entry S(row, col), 0-based, across all frequencies.
    pub fn trace(&self, row: usize, col: usize) -> Vec<Complex64> {
        self.s_matrix.iter().map(|m| m[(row, col)]).collect()
    }

    pub fn s11(&self) -> Vec<Complex64> {
        self.trace(0, 0)
    }

    pub fn s21(&self) -> Vec<Complex64> {
        self.trace(1, 0)
    }

    /// Port-swapped copy of a 2-port (S11 <-> S22, S12 <-> S21).
    pub fn flipped(&self) -> Result<Self> {
        self.require_ports(2)?;
        let mut out = self.clone();
        for m in &mut out.s_matrix {
            m.swap((0, 0), (1, 1));
            m.swap((0, 1), (1, 0));
        }
        Ok(out)
    }

    pub fn require_ports(&self, n: usize) -> Result<()> {
        if self.port_count != n {
            return Err(Error::InvalidNetwork(format!(
                "expected a {n}-port network, got {} ports",
                self.port_count
            )));
        }
        Ok(())
    }

    /// Largest |S_ij - S_ji| over all frequencies and port pairs.
    pub fn reciprocity_error(&self) -> f64 {
        let n = self.port_count;
        self.s_matrix
            .iter()
            .flat_map(|m| {
                (0..n).flat_map(move |i| (0..n).map(move |j| (m[(i, j)] - m[(j, i)]).norm()))
            })
            .fold(0.0, f64::max)
    }

    /// Largest entrywise |S_a - S_b| between networks on the same grid.
    pub fn max_abs_diff(&self, other: &Self) -> Result<f64> {
        same_grid(self, other)?;
        if self.port_count != other.port_count {
            return Err(Error::InvalidNetwork("port counts differ".into()));
        }
        Ok(self
            .s_matrix
            .iter()
            .zip(&other.s_matrix)
            .map(|(a, b)| (a - b).iter().map(|z| z.norm()).fold(0.0, f64::max))
            .fold(0.0, f64::max))
    }
}

/// Checks that two networks share one frequency grid exactly.
pub fn same_grid(a: &SParameterNetwork, b: &SParameterNetwork) -> Result<()> {
    if a.frequencies_hz != b.frequencies_hz {
        return Err(Error::GridMismatch(format!(
            "{} points [{:.6e}..{:.6e}] vs {} points [{:.6e}..{:.6e}]",
            a.len(),
            a.frequencies_hz.first().copied().unwrap_or(f64::NAN),
            a.f_max(),
            b.len(),
            b.frequencies_hz.first().copied().unwrap_or(f64::NAN),
            b.f_max()
        )));
    }
    Ok(())
}

/// Uniform grid of `points` frequencies from `start` to `stop` inclusive.
pub fn linear_grid(start_hz: f64, stop_hz: f64, points: usize) -> Vec<f64> {
    match points {
        0 => Vec::new(),
        1 => vec![start_hz],
        _ => {
            let step = (stop_hz - start_hz) / (points - 1) as f64;
            (0..points).map(|i| start_hz + step * i as f64).collect()
        }
    }
}

/// 20*log10(|z|).
pub fn db(z: Complex64) -> f64 {
    20.0 * z.norm().log10()
}
