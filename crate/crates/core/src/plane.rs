//! Points and 2x2 matrices in the plane, and the complex structure J.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use std::ops::{Add, Mul, Neg, Sub};

/// A point u = (p, q) in the plane.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct PlanePoint {
    pub p: f64,
    pub q: f64,
}

impl PlanePoint {
    pub const ZERO: PlanePoint = PlanePoint { p: 0.0, q: 0.0 };

    pub fn new(p: f64, q: f64) -> Self {
        PlanePoint { p, q }
    }

    pub fn norm(self) -> f64 {
        self.p.hypot(self.q)
    }

    pub fn norm_sq(self) -> f64 {
        self.p * self.p + self.q * self.q
    }

    pub fn dot(self, other: PlanePoint) -> f64 {
        self.p * other.p + self.q * other.q
    }

    pub fn sup(self) -> f64 {
        self.p.abs().max(self.q.abs())
    }

    pub fn is_finite(self) -> bool {
        self.p.is_finite() && self.q.is_finite()
    }

    pub fn scale(self, c: f64) -> PlanePoint {
        PlanePoint::new(c * self.p, c * self.q)
    }
}

impl Add for PlanePoint {
    type Output = PlanePoint;
    fn add(self, rhs: PlanePoint) -> PlanePoint {
        PlanePoint::new(self.p + rhs.p, self.q + rhs.q)
    }
}

impl Sub for PlanePoint {
    type Output = PlanePoint;
    fn sub(self, rhs: PlanePoint) -> PlanePoint {
        PlanePoint::new(self.p - rhs.p, self.q - rhs.q)
    }
}

impl Neg for PlanePoint {
    type Output = PlanePoint;
    fn neg(self) -> PlanePoint {
        PlanePoint::new(-self.p, -self.q)
    }
}

impl Mul<f64> for PlanePoint {
    type Output = PlanePoint;
    fn mul(self, c: f64) -> PlanePoint {
        self.scale(c)
    }
}

/// The symplectic matrix J: rotation by 90 degrees, J^2 = -I.
pub fn apply_j(x: PlanePoint) -> PlanePoint {
    PlanePoint::new(-x.q, x.p)
}

/// A real 2x2 matrix, row-major: [[a, b], [c, d]].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Mat2 {
    pub a: f64,
    pub b: f64,
    pub c: f64,
    pub d: f64,
}

impl Mat2 {
    pub const ZERO: Mat2 = Mat2 { a: 0.0, b: 0.0, c: 0.0, d: 0.0 };
    pub const IDENTITY: Mat2 = Mat2 { a: 1.0, b: 0.0, c: 0.0, d: 1.0 };
    /// The symplectic matrix J as a Mat2.
    pub const J: Mat2 = Mat2 { a: 0.0, b: -1.0, c: 1.0, d: 0.0 };

    pub fn new(a: f64, b: f64, c: f64, d: f64) -> Self {
        Mat2 { a, b, c, d }
    }

    pub fn diag(a: f64, d: f64) -> Self {
        Mat2::new(a, 0.0, 0.0, d)
    }

    pub fn mul_vec(self, v: PlanePoint) -> PlanePoint {
        PlanePoint::new(self.a * v.p + self.b * v.q, self.c * v.p + self.d * v.q)
    }

    pub fn mul_mat(self, m: Mat2) -> Mat2 {
        Mat2::new(
            self.a * m.a + self.b * m.c,
            self.a * m.b + self.b * m.d,
            self.c * m.a + self.d * m.c,
            self.c * m.b + self.d * m.d,
        )
    }

    pub fn scale(self, s: f64) -> Mat2 {
        Mat2::new(s * self.a, s * self.b, s * self.c, s * self.d)
    }

    pub fn add(self, m: Mat2) -> Mat2 {
        Mat2::new(self.a + m.a, self.b + m.b, self.c + m.c, self.d + m.d)
    }

    pub fn sub(self, m: Mat2) -> Mat2 {
        Mat2::new(self.a - m.a, self.b - m.b, self.c - m.c, self.d - m.d)
    }

    pub fn trace(self) -> f64 {
        self.a + self.d
    }

    pub fn det(self) -> f64 {
        self.a * self.d - self.b * self.c
    }

    pub fn transpose(self) -> Mat2 {
        Mat2::new(self.a, self.c, self.b, self.d)
    }

    pub fn max_abs(self) -> f64 {
        self.a.abs().max(self.b.abs()).max(self.c.abs()).max(self.d.abs())
    }

    pub fn is_finite(self) -> bool {
        self.a.is_finite() && self.b.is_finite() && self.c.is_finite() && self.d.is_finite()
    }

    /// Solve M x = rhs. Returns None when |det| is below `tol`.
    pub fn solve(self, rhs: PlanePoint, tol: f64) -> Option<PlanePoint> {
        let det = self.det();
        if det.abs() < tol {
            return None;
        }
        Some(PlanePoint::new(
            (self.d * rhs.p - self.b * rhs.q) / det,
            (-self.c * rhs.p + self.a * rhs.q) / det,
        ))
    }

    /// Eigenvalues by the closed-form 2x2 formula.
    pub fn eigenvalues(self) -> (Complex64, Complex64) {
        let tr = self.trace();
        let disc = tr * tr - 4.0 * self.det();
        if disc >= 0.0 {
            let root = disc.sqrt();
            (
                Complex64::new(0.5 * (tr + root), 0.0),
                Complex64::new(0.5 * (tr - root), 0.0),
            )
        } else {
            let root = (-disc).sqrt();
            (
                Complex64::new(0.5 * tr, 0.5 * root),
                Complex64::new(0.5 * tr, -0.5 * root),
            )
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn j_rotates_by_quarter_turn() {
        assert_eq!(apply_j(PlanePoint::new(1.0, 0.0)), PlanePoint::new(0.0, 1.0));
        assert_eq!(apply_j(PlanePoint::new(0.0, 1.0)), PlanePoint::new(-1.0, 0.0));
        assert_eq!(apply_j(PlanePoint::ZERO), PlanePoint::ZERO);
    }

    #[test]
    fn j_squared_is_minus_identity() {
        for &(p, q) in &[(1.0, 0.0), (0.3, -2.7), (-11.0, 5.5), (0.0, 0.0)] {
            let x = PlanePoint::new(p, q);
            assert_eq!(apply_j(apply_j(x)), -x);
        }
    }

    #[test]
    fn eigenvalues_of_rotation() {
        // e^J = rotation by one radian has eigenvalues e^{+-i}.
        let m = Mat2::new(1f64.cos(), -1f64.sin(), 1f64.sin(), 1f64.cos());
        let (l1, l2) = m.eigenvalues();
        assert!((l1 - Complex64::new(1f64.cos(), 1f64.sin())).norm() < 1e-14);
        assert!((l2 - Complex64::new(1f64.cos(), -1f64.sin())).norm() < 1e-14);
    }

    #[test]
    fn eigenvalues_of_diagonal() {
        let (l1, l2) = Mat2::diag(2.0, 0.5).eigenvalues();
        assert_eq!(l1, Complex64::new(2.0, 0.0));
        assert_eq!(l2, Complex64::new(0.5, 0.0));
    }

    #[test]
    fn solve_inverts() {
        let m = Mat2::new(2.0, 1.0, -1.0, 3.0);
        let rhs = PlanePoint::new(0.5, -2.0);
        let x = m.solve(rhs, 1e-12).unwrap();
        let back = m.mul_vec(x);
        assert!((back - rhs).norm() < 1e-14);
        assert!(Mat2::ZERO.solve(rhs, 1e-12).is_none());
    }
}
