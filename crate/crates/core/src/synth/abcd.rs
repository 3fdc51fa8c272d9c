use num_complex::Complex64;

use crate::network::SMatrix;

/// Chain (ABCD) parameters of a two-port at one frequency.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Abcd {
    pub a: Complex64,
    pub b: Complex64,
    pub c: Complex64,
    pub d: Complex64,
}

impl Abcd {
    pub fn identity() -> Self {
        let one = Complex64::new(1.0, 0.0);
        let zero = Complex64::new(0.0, 0.0);
        Self { a: one, b: zero, c: zero, d: one }
    }

    pub fn shunt(y: Complex64) -> Self {
        Self { c: y, ..Self::identity() }
    }

    /// Lossless TEM line of impedance `z` and electrical length `theta` rad.
    pub fn line(z: f64, theta: f64) -> Self {
        let (s, c) = theta.sin_cos();
        Self {
            a: Complex64::new(c, 0.0),
            b: Complex64::new(0.0, z * s),
            c: Complex64::new(0.0, s / z),
            d: Complex64::new(c, 0.0),
        }
    }

    /// `self` followed by `next`.
    pub fn then(&self, next: &Abcd) -> Self {
        Self {
            a: self.a * next.a + self.b * next.c,
            b: self.a * next.b + self.b * next.d,
            c: self.c * next.a + self.d * next.c,
            d: self.c * next.b + self.d * next.d,
        }
    }

    /// Input admittance with admittance `y_load` on port 2.
    pub fn input_admittance(&self, y_load: Complex64) -> Complex64 {
        (self.c + self.d * y_load) / (self.a + self.b * y_load)
    }

    /// S-parameters for a real reference impedance `z0` on both ports.
    pub fn to_s(&self, z0: f64) -> SMatrix {
        let b = self.b / z0;
        let c = self.c * z0;
        let den = self.a + b + c + self.d;
        let s11 = (self.a + b - c - self.d) / den;
        let s22 = (-self.a + b - c + self.d) / den;
        let s21 = Complex64::new(2.0, 0.0) / den;
        let s12 = (self.a * self.d - self.b * self.c) * 2.0 / den;
        SMatrix::from_row_slice(2, 2, &[s11, s12, s21, s22])
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn matched_line_has_no_reflection() {
        let s = Abcd::line(50.0, 0.7).to_s(50.0);
        assert!(s[(0, 0)].norm() < 1e-15);
        assert!((s[(1, 0)] - Complex64::from_polar(1.0, -0.7)).norm() < 1e-15);
    }

    #[test]
    fn shunt_matches_closed_form() {
        let y = Complex64::new(0.0, 0.02);
        let s = Abcd::shunt(y).to_s(50.0);
        let yn = y * 50.0;
        assert!((s[(0, 0)] + yn / (yn + 2.0)).norm() < 1e-15);
    }
}
