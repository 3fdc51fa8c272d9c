//! S-parameter algebra: wave-cascading matrices, cascading, mixed-mode
//! reduction, THRU bisection and passivity checks.
//!
//! Transmission-matrix convention, used everywhere in this crate:
//!
//! ```text
//! [a1]       [b2]          T = 1/S21 * [ 1    -S22 ]
//! [b1] = T * [a2],                     [ S11  -det S ]
//! ```
//!
//! so that the series connection of A then B is `T_A * T_B`. All waves are
//! normalized to the network's common real reference impedance.

use nalgebra::{DMatrix, Matrix2, Matrix4};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::network::{same_grid, SMatrix, SParameterNetwork};

const SINGULAR_EPS: f64 = 1e-15;

/// Per-frequency 2x2 wave-cascading matrices.
#[derive(Debug, Clone, PartialEq)]
pub struct TransmissionMatrix {
    pub frequencies_hz: Vec<f64>,
    pub t: Vec<Matrix2<Complex64>>,
    pub reference_ohms: f64,
}

fn s_block_to_t(s: &SMatrix, freq_hz: f64) -> Result<Matrix2<Complex64>> {
    let (s11, s12, s21, s22) = (s[(0, 0)], s[(0, 1)], s[(1, 0)], s[(1, 1)]);
    if s21.norm() < SINGULAR_EPS {
        return Err(Error::Singular {
            freq_hz,
            detail: format!("|S21| = {:.3e}", s21.norm()),
        });
    }
    let det = s11 * s22 - s12 * s21;
    let one = Complex64::new(1.0, 0.0);
    Ok(Matrix2::new(one, -s22, s11, -det) / s21)
}

fn t_block_to_s(t: &Matrix2<Complex64>, freq_hz: f64) -> Result<SMatrix> {
    let t11 = t[(0, 0)];
    if t11.norm() < SINGULAR_EPS {
        return Err(Error::Singular {
            freq_hz,
            detail: format!("|T11| = {:.3e}", t11.norm()),
        });
    }
    let det = t[(0, 0)] * t[(1, 1)] - t[(0, 1)] * t[(1, 0)];
    let s11 = t[(1, 0)] / t11;
    let s21 = t11.inv();
    let s12 = det / t11;
    let s22 = -t[(0, 1)] / t11;
    Ok(SMatrix::from_row_slice(2, 2, &[s11, s12, s21, s22]))
}

pub fn s_to_t(net: &SParameterNetwork) -> Result<TransmissionMatrix> {
    net.require_ports(2)?;
    let t = net
        .frequencies_hz
        .iter()
        .zip(&net.s_matrix)
        .map(|(&f, s)| s_block_to_t(s, f))
        .collect::<Result<_>>()?;
    Ok(TransmissionMatrix {
        frequencies_hz: net.frequencies_hz.clone(),
        t,
        reference_ohms: net.reference_ohms,
    })
}

pub fn t_to_s(tm: &TransmissionMatrix) -> Result<SParameterNetwork> {
    let mats = tm
        .frequencies_hz
        .iter()
        .zip(&tm.t)
        .map(|(&f, t)| t_block_to_s(t, f))
        .collect::<Result<_>>()?;
    SParameterNetwork::new(2, tm.frequencies_hz.clone(), mats, tm.reference_ohms)
}

/// Series connection: port 2 of `a` drives port 1 of `b`.
///
/// Grids and reference impedances must already agree; nothing is resampled.
pub fn cascade(a: &SParameterNetwork, b: &SParameterNetwork) -> Result<SParameterNetwork> {
    a.require_ports(2)?;
    b.require_ports(2)?;
    same_grid(a, b)?;
    if a.reference_ohms != b.reference_ohms {
        return Err(Error::ReferenceMismatch {
            a: a.reference_ohms,
            b: b.reference_ohms,
        });
    }
    let ta = s_to_t(a)?;
    let tb = s_to_t(b)?;
    let t = ta.t.iter().zip(&tb.t).map(|(x, y)| x * y).collect();
    let mut out = t_to_s(&TransmissionMatrix {
        frequencies_hz: a.frequencies_hz.clone(),
        t,
        reference_ohms: a.reference_ohms,
    })?;
    out.source_format = a.source_format;
    Ok(out)
}

/// Cascades a non-empty chain left to right.
pub fn cascade_all(chain: &[&SParameterNetwork]) -> Result<SParameterNetwork> {
    let (first, rest) = chain
        .split_first()
        .ok_or_else(|| Error::InvalidParameter("empty cascade chain".into()))?;
    rest.iter()
        .try_fold((*first).clone(), |acc, next| cascade(&acc, next))
}

/// Assignment of single-ended ports (1-based) to the two differential pairs.
/// Mixed-mode port 1 is `pair_a`, port 2 is `pair_b`; each pair is
/// `(positive, negative)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct PortMap {
    pub pair_a: (usize, usize),
    pub pair_b: (usize, usize),
}

impl Default for PortMap {
    fn default() -> Self {
        Self {
            pair_a: (1, 3),
            pair_b: (2, 4),
        }
    }
}

impl PortMap {
    pub fn validate(&self) -> Result<()> {
        let idx = [self.pair_a.0, self.pair_a.1, self.pair_b.0, self.pair_b.1];
        if idx.iter().any(|&p| !(1..=4).contains(&p)) {
            return Err(Error::PortMap(format!("indices {idx:?} must lie in 1..=4")));
        }
        for i in 0..4 {
            for j in i + 1..4 {
                if idx[i] == idx[j] {
                    return Err(Error::PortMap(format!("port {} used twice", idx[i])));
                }
            }
        }
        Ok(())
    }

    /// Orthonormal change of basis with rows (d1, d2, c1, c2).
    fn basis(&self) -> Matrix4<f64> {
        let h = std::f64::consts::FRAC_1_SQRT_2;
        let mut m = Matrix4::zeros();
        for (row, (p, n), sign) in [
            (0, self.pair_a, -1.0),
            (1, self.pair_b, -1.0),
            (2, self.pair_a, 1.0),
            (3, self.pair_b, 1.0),
        ] {
            m[(row, p - 1)] = h;
            m[(row, n - 1)] = sign * h;
        }
        m
    }
}

/// Differential/common-mode blocks of a 4-port.
#[derive(Debug, Clone, PartialEq)]
pub struct MixedModeNetwork {
    pub sdd: SParameterNetwork,
    pub sdc: SParameterNetwork,
    pub scd: SParameterNetwork,
    pub scc: SParameterNetwork,
    pub port_map: PortMap,
}

pub fn single_ended_to_mixed_mode(
    net: &SParameterNetwork,
    map: PortMap,
) -> Result<MixedModeNetwork> {
    net.require_ports(4)?;
    map.validate()?;
    let m = map.basis().map(|x| Complex64::new(x, 0.0));
    let mt = m.transpose();
    let mut blocks: [Vec<SMatrix>; 4] = Default::default();
    for s in &net.s_matrix {
        let s4 = Matrix4::from_fn(|i, j| s[(i, j)]);
        let mm = m * s4 * mt;
        for (b, (r0, c0)) in [(0, 0), (0, 2), (2, 0), (2, 2)].into_iter().enumerate() {
            blocks[b].push(DMatrix::from_fn(2, 2, |i, j| mm[(r0 + i, c0 + j)]));
        }
    }
    let [sdd, sdc, scd, scc] = blocks.map(|mats| {
        SParameterNetwork::new(2, net.frequencies_hz.clone(), mats, net.reference_ohms)
    });
    Ok(MixedModeNetwork {
        sdd: sdd?,
        sdc: sdc?,
        scd: scd?,
        scc: scc?,
        port_map: map,
    })
}

/// Outcome of THRU bisection.
#[derive(Debug, Clone)]
pub struct Bisection {
    /// Half structure H with `cascade(H, flip(H))` approximating the input.
    pub half: SParameterNetwork,
    /// max |S(cascade(H, flip(H))) - S(input)|.
    pub residual: f64,
    /// max |S11 - S22| of the input.
    pub asymmetry: f64,
    /// max |S12 - S21| of the input.
    pub non_reciprocity: f64,
}

/// Symmetry deviation above which bisection warns but proceeds.
pub const BISECT_SYMMETRY_TOL: f64 = 0.02;

/// Square roots of a 2x2 matrix as the pair `(R, -R)` with det(R) close to
/// the principal root of det(T), via the eigen-projector form of the
/// eigendecomposition.
fn sqrt_candidates(
    t: &Matrix2<Complex64>,
    freq_hz: f64,
    prev: Option<&Matrix2<Complex64>>,
) -> Result<Matrix2<Complex64>> {
    let half_tr = t.trace() / 2.0;
    let det = t.determinant();
    let half_diff = (t[(0, 0)] - t[(1, 1)]) / 2.0;
    let disc = (half_diff * half_diff + t[(0, 1)] * t[(1, 0)]).sqrt();
    let mu1 = half_tr + disc;
    let mu2 = half_tr - disc;
    let scale = t.norm().max(f64::MIN_POSITIVE);
    let eye = Matrix2::identity();
    if (mu1 - mu2).norm() <= 1e-12 * (mu1.norm() + mu2.norm()) {
        if (t - eye * half_tr).norm() > 1e-12 * scale {
            return Err(Error::Defective { freq_hz });
        }
        // Scalar T: any eigenbasis works; reuse the previous root's.
        let r = half_tr.sqrt();
        let Some(p) = prev else {
            return Ok(eye * r);
        };
        let Some((p1, p2)) = projectors(p) else {
            return Ok(eye * r);
        };
        let best = [(1.0, 1.0), (1.0, -1.0), (-1.0, 1.0), (-1.0, -1.0)]
            .iter()
            .map(|&(a, b)| p1 * (r * a) + p2 * (r * b))
            .min_by(|x, y| (x - p).norm().total_cmp(&(y - p).norm()))
            .expect("non-empty");
        return Ok(best);
    }
    let r1 = mu1.sqrt();
    let r2 = det.sqrt() / r1;
    Ok(((t - eye * mu2) * r1 - (t - eye * mu1) * r2) / (mu1 - mu2))
}

/// Spectral projectors of a 2x2 matrix with distinct eigenvalues.
fn projectors(m: &Matrix2<Complex64>) -> Option<(Matrix2<Complex64>, Matrix2<Complex64>)> {
    let half_tr = m.trace() / 2.0;
    let half_diff = (m[(0, 0)] - m[(1, 1)]) / 2.0;
    let disc = (half_diff * half_diff + m[(0, 1)] * m[(1, 0)]).sqrt();
    if disc.norm() <= 1e-12 * m.norm() {
        return None;
    }
    let eye = Matrix2::identity();
    let p1 = (m - eye * (half_tr - disc)) / (disc * 2.0);
    Some((p1, eye - p1))
}

/// De-embeds one half of a symmetric reciprocal THRU.
///
/// Per frequency the T-matrix square root is taken by eigendecomposition.
/// The two admissible roots differ only in sign; the lowest frequency picks
/// the root with Re(S21) >= 0 (near-zero phase, i.e. the grid is assumed to
/// start below the first half-wave of the THRU), and every later point picks
/// the root whose S21 is closest to the previous point's.
pub fn bisect_thru(net: &SParameterNetwork) -> Result<Bisection> {
    net.require_ports(2)?;
    let asymmetry = net
        .s_matrix
        .iter()
        .map(|m| (m[(0, 0)] - m[(1, 1)]).norm())
        .fold(0.0, f64::max);
    let non_reciprocity = net.reciprocity_error();
    if asymmetry > BISECT_SYMMETRY_TOL {
        log::warn!("bisection input is asymmetric: max |S11 - S22| = {asymmetry:.4}");
    }
    if non_reciprocity > BISECT_SYMMETRY_TOL {
        log::warn!("bisection input is non-reciprocal: max |S12 - S21| = {non_reciprocity:.4}");
    }

    let tm = s_to_t(net)?;
    let mut halves = Vec::with_capacity(tm.t.len());
    let mut prev_s21: Option<Complex64> = None;
    for (&f, t) in tm.frequencies_hz.iter().zip(&tm.t) {
        let root = sqrt_candidates(t, f, halves.last())?;
        if root[(0, 0)].norm() < SINGULAR_EPS {
            return Err(Error::Singular {
                freq_hz: f,
                detail: "half-structure T11 vanishes".into(),
            });
        }
        let s21 = root[(0, 0)].inv();
        let keep = match prev_s21 {
            None => {
                if s21.re.abs() <= 1e-12 * s21.norm() {
                    return Err(Error::BranchAmbiguity { freq_hz: f });
                }
                s21.re > 0.0
            }
            Some(p) => {
                let d_plus = (s21 - p).norm();
                let d_minus = (s21 + p).norm();
                if (d_plus - d_minus).abs() <= 1e-9 * (d_plus + d_minus) {
                    return Err(Error::BranchAmbiguity { freq_hz: f });
                }
                d_plus < d_minus
            }
        };
        let chosen = if keep { root } else { -root };
        prev_s21 = Some(chosen[(0, 0)].inv());
        halves.push(chosen);
    }

    let half = t_to_s(&TransmissionMatrix {
        frequencies_hz: tm.frequencies_hz,
        t: halves,
        reference_ohms: net.reference_ohms,
    })?;
    let rebuilt = cascade(&half, &half.flipped()?)?;
    let residual = rebuilt.max_abs_diff(net)?;
    Ok(Bisection {
        half,
        residual,
        asymmetry,
        non_reciprocity,
    })
}

/// Largest singular value of S across frequency.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PassivityReport {
    pub max_singular_value: f64,
    pub at_frequency_hz: f64,
    /// Frequencies where the largest singular value exceeds 1 + tolerance.
    pub violations_hz: Vec<f64>,
    pub passive: bool,
}

pub const PASSIVITY_TOL: f64 = 1e-6;

pub fn check_passivity(net: &SParameterNetwork) -> PassivityReport {
    let mut worst = (0.0, f64::NAN);
    let mut violations = Vec::new();
    for (&f, s) in net.frequencies_hz.iter().zip(&net.s_matrix) {
        let sv = s.singular_values().max();
        if sv > worst.0 || worst.1.is_nan() {
            worst = (sv, f);
        }
        if sv > 1.0 + PASSIVITY_TOL {
            violations.push(f);
        }
    }
    PassivityReport {
        max_singular_value: worst.0,
        at_frequency_hz: worst.1,
        passive: violations.is_empty(),
        violations_hz: violations,
    }
}
