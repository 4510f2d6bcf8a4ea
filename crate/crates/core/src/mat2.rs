//! Real 2x2 matrices.

use serde::{Deserialize, Serialize};
use std::ops::{Mul, Sub};

/// Row-major `[[a, b], [c, d]]`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Mat2 {
    pub a: f64,
    pub b: f64,
    pub c: f64,
    pub d: f64,
}

impl Mat2 {
    pub const IDENTITY: Mat2 = Mat2::new(1.0, 0.0, 0.0, 1.0);

    pub const fn new(a: f64, b: f64, c: f64, d: f64) -> Self {
        Mat2 { a, b, c, d }
    }

    pub const fn diag(x: f64, y: f64) -> Self {
        Mat2::new(x, 0.0, 0.0, y)
    }

    /// Rotation by `2 pi t`.
    pub fn rotation(t: f64) -> Self {
        let (s, c) = (std::f64::consts::TAU * t).sin_cos();
        Mat2::new(c, -s, s, c)
    }

    pub fn det(&self) -> f64 {
        self.a * self.d - self.b * self.c
    }

    /// Squared Frobenius norm.
    pub fn frob2(&self) -> f64 {
        self.a * self.a + self.b * self.b + self.c * self.c + self.d * self.d
    }

    pub fn scale(&self, k: f64) -> Self {
        Mat2::new(self.a * k, self.b * k, self.c * k, self.d * k)
    }

    pub fn is_finite(&self) -> bool {
        self.a.is_finite() && self.b.is_finite() && self.c.is_finite() && self.d.is_finite()
    }

    /// Largest singular value, from the closed form
    /// `sigma_max^2 = (F^2 + sqrt(F^4 - 4 det^2)) / 2`, evaluated in the
    /// equivalent cancellation-free form
    /// `(|(a+d, b-c)| + |(a-d, b+c)|) / 2`.
    pub fn op_norm(&self) -> f64 {
        if self.b == 0.0 && self.c == 0.0 {
            return self.a.abs().max(self.d.abs());
        }
        let r1 = (self.a + self.d).hypot(self.b - self.c);
        let r2 = (self.a - self.d).hypot(self.b + self.c);
        0.5 * (r1 + r2)
    }

    /// Largest singular value from the textbook closed form (reference only).
    pub fn op_norm_closed_form(&self) -> f64 {
        let f2 = self.frob2();
        let det = self.det();
        ((f2 + (f2 * f2 - 4.0 * det * det).max(0.0).sqrt()) / 2.0).sqrt()
    }
}

impl Mul for Mat2 {
    type Output = Mat2;

    #[inline]
    fn mul(self, r: Mat2) -> Mat2 {
        Mat2::new(
            self.a * r.a + self.b * r.c,
            self.a * r.b + self.b * r.d,
            self.c * r.a + self.d * r.c,
            self.c * r.b + self.d * r.d,
        )
    }
}

impl Sub for Mat2 {
    type Output = Mat2;

    fn sub(self, r: Mat2) -> Mat2 {
        Mat2::new(self.a - r.a, self.b - r.b, self.c - r.c, self.d - r.d)
    }
}
