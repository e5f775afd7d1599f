//! Registry of non-autonomous planar vector fields F(t, u) with exact
//! u-Jacobians, 1-periodic in t by construction.

use crate::error::{Error, Result};
use crate::field::Loop;
use crate::plane::{apply_j, Mat2, PlanePoint};
use crate::rng::SplitMix64;
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;

/// Seed for the pseudo-random Jacobian consistency check; fixed so CI runs are
/// reproducible.
pub const JACOBIAN_CHECK_SEED: u64 = 0x5EED_CB01;

/// Named Hamiltonians H(u); the induced field is F = J grad H.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum HamiltonianKind {
    /// H = coeff * |u|^2. F = 2 coeff J u rotates at rate 2 coeff.
    Quadratic { coeff: f64 },
    /// Pendulum-type H = q^2/2 + (1 - cos 2 pi p) / (4 pi^2).
    /// Critical points sit at p in {0, 1/2} per unit cell, q = 0.
    Pendulum,
}

impl HamiltonianKind {
    pub fn value(&self, u: PlanePoint) -> f64 {
        match self {
            HamiltonianKind::Quadratic { coeff } => coeff * u.norm_sq(),
            HamiltonianKind::Pendulum => {
                0.5 * u.q * u.q + (1.0 - (2.0 * PI * u.p).cos()) / (4.0 * PI * PI)
            }
        }
    }

    pub fn gradient(&self, u: PlanePoint) -> PlanePoint {
        match self {
            HamiltonianKind::Quadratic { coeff } => u * (2.0 * coeff),
            HamiltonianKind::Pendulum => {
                PlanePoint::new((2.0 * PI * u.p).sin() / (2.0 * PI), u.q)
            }
        }
    }

    pub fn hessian(&self, u: PlanePoint) -> Mat2 {
        match self {
            HamiltonianKind::Quadratic { coeff } => Mat2::diag(2.0 * coeff, 2.0 * coeff),
            HamiltonianKind::Pendulum => Mat2::diag((2.0 * PI * u.p).cos(), 1.0),
        }
    }
}

/// One term of a custom polynomial field: coeff * p^a q^b * phi_m(t) added to
/// the given component, with phi_0 = 1, phi_m = cos(2 pi m t) for m > 0 and
/// phi_m = sin(2 pi |m| t) for m < 0.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PolyTerm {
    pub component: usize,
    pub p_exp: u32,
    pub q_exp: u32,
    pub fourier: i32,
    pub coeff: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum VectorFieldSpec {
    Zero,
    /// F(u) = rate * J u.
    LinearRotation { rate: f64 },
    /// F = J grad H.
    Hamiltonian(HamiltonianKind),
    /// F = J V with V(u) = (mu - |u|^2) u + omega J u. The t-independent
    /// solutions of the cylinder equation then follow the planar flow
    /// u_s = V(u), which has an attracting cycle of radius sqrt(mu).
    HopfGradientPair { mu: f64, omega: f64 },
    Custom(Vec<PolyTerm>),
}

fn fourier_basis(m: i32, t: f64) -> f64 {
    // Reduce t first so F(t + 1, u) == F(t, u) exactly in floating point.
    let tf = t.rem_euclid(1.0);
    match m.cmp(&0) {
        std::cmp::Ordering::Equal => 1.0,
        std::cmp::Ordering::Greater => (2.0 * PI * m as f64 * tf).cos(),
        std::cmp::Ordering::Less => (2.0 * PI * (-m) as f64 * tf).sin(),
    }
}

fn pow_u32(x: f64, n: u32) -> f64 {
    x.powi(n as i32)
}

impl VectorFieldSpec {
    /// Evaluate F(t, u).
    pub fn eval_f(&self, t: f64, u: PlanePoint) -> PlanePoint {
        match self {
            VectorFieldSpec::Zero => PlanePoint::ZERO,
            VectorFieldSpec::LinearRotation { rate } => apply_j(u) * *rate,
            VectorFieldSpec::Hamiltonian(h) => apply_j(h.gradient(u)),
            VectorFieldSpec::HopfGradientPair { mu, omega } => {
                let v = u * (mu - u.norm_sq()) + apply_j(u) * *omega;
                apply_j(v)
            }
            VectorFieldSpec::Custom(terms) => {
                let mut out = PlanePoint::ZERO;
                for term in terms {
                    let val = term.coeff
                        * pow_u32(u.p, term.p_exp)
                        * pow_u32(u.q, term.q_exp)
                        * fourier_basis(term.fourier, t);
                    if term.component == 0 {
                        out.p += val;
                    } else {
                        out.q += val;
                    }
                }
                out
            }
        }
    }

    /// Exact analytic Jacobian of F(t, .) at u.
    pub fn eval_df(&self, t: f64, u: PlanePoint) -> Mat2 {
        match self {
            VectorFieldSpec::Zero => Mat2::ZERO,
            VectorFieldSpec::LinearRotation { rate } => Mat2::J.scale(*rate),
            VectorFieldSpec::Hamiltonian(h) => Mat2::J.mul_mat(h.hessian(u)),
            VectorFieldSpec::HopfGradientPair { mu, omega } => {
                // DV = (mu - |u|^2) I - 2 u u^T + omega J, DF = J DV.
                let r2 = u.norm_sq();
                let dv = Mat2::new(
                    mu - r2 - 2.0 * u.p * u.p,
                    -2.0 * u.p * u.q - omega,
                    -2.0 * u.p * u.q + omega,
                    mu - r2 - 2.0 * u.q * u.q,
                );
                Mat2::J.mul_mat(dv)
            }
            VectorFieldSpec::Custom(terms) => {
                let mut m = Mat2::ZERO;
                for term in terms {
                    let phi = fourier_basis(term.fourier, t);
                    let dp = if term.p_exp == 0 {
                        0.0
                    } else {
                        term.coeff
                            * term.p_exp as f64
                            * pow_u32(u.p, term.p_exp - 1)
                            * pow_u32(u.q, term.q_exp)
                            * phi
                    };
                    let dq = if term.q_exp == 0 {
                        0.0
                    } else {
                        term.coeff
                            * pow_u32(u.p, term.p_exp)
                            * term.q_exp as f64
                            * pow_u32(u.q, term.q_exp - 1)
                            * phi
                    };
                    if term.component == 0 {
                        m.a += dp;
                        m.b += dq;
                    } else {
                        m.c += dp;
                        m.d += dq;
                    }
                }
                m
            }
        }
    }

    /// The Hamiltonian behind this field, when it has one.
    pub fn hamiltonian(&self) -> Option<HamiltonianKind> {
        match self {
            VectorFieldSpec::Hamiltonian(h) => Some(*h),
            VectorFieldSpec::LinearRotation { rate } => {
                Some(HamiltonianKind::Quadratic { coeff: rate / 2.0 })
            }
            _ => None,
        }
    }

    /// Max relative error between the analytic Jacobian and central finite
    /// differences of F over pseudo-random samples with |u| <= 2.
    pub fn check_jacobian(&self, n_samples: usize, h: f64) -> Result<f64> {
        if !(1e-9..1e-2).contains(&h) {
            return Err(Error::InvalidParameter(format!(
                "finite-difference step h = {h} outside (1e-9, 1e-2)"
            )));
        }
        let mut rng = SplitMix64::new(JACOBIAN_CHECK_SEED);
        let mut worst = 0.0f64;
        for _ in 0..n_samples {
            let t = rng.next_f64();
            // Rejection-sample the disk |u| <= 2.
            let u = loop {
                let cand = PlanePoint::new(rng.uniform(-2.0, 2.0), rng.uniform(-2.0, 2.0));
                if cand.norm() <= 2.0 {
                    break cand;
                }
            };
            let exact = self.eval_df(t, u);
            let fp = (self.eval_f(t, u + PlanePoint::new(h, 0.0))
                - self.eval_f(t, u - PlanePoint::new(h, 0.0)))
                * (0.5 / h);
            let fq = (self.eval_f(t, u + PlanePoint::new(0.0, h))
                - self.eval_f(t, u - PlanePoint::new(0.0, h)))
                * (0.5 / h);
            let fd = Mat2::new(fp.p, fq.p, fp.q, fq.q);
            let err = fd.sub(exact).max_abs() / exact.max_abs().max(1.0);
            worst = worst.max(err);
        }
        Ok(worst)
    }
}

/// Discrete Hamilton action of a loop v for a Hamiltonian field:
///   A(v) = - int_0^1 [ (J v_t) . v / 2 + H(t, v) ] dt,
/// rectangle quadrature with the spectral t-derivative. Along solutions of
/// the cylinder equation with F = J grad H this quantity is non-increasing
/// in s. Returns None for fields without a Hamiltonian.
pub fn hamilton_action(spec: &VectorFieldSpec, v: &Loop) -> Option<f64> {
    let h = spec.hamiltonian()?;
    let vt = v.d_t();
    let dt = v.time().dt();
    let mut acc = 0.0;
    for (&x, &xt) in v.values().iter().zip(vt.values().iter()) {
        acc += 0.5 * apply_j(xt).dot(x) + h.value(x);
    }
    Some(-acc * dt)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn zero_field() {
        let f = VectorFieldSpec::Zero;
        assert_eq!(f.eval_f(0.3, PlanePoint::new(1.0, -2.0)), PlanePoint::ZERO);
        assert_eq!(f.eval_df(0.3, PlanePoint::new(1.0, -2.0)), Mat2::ZERO);
        assert_eq!(f.check_jacobian(10, 1e-5).unwrap(), 0.0);
    }

    #[test]
    fn quadratic_hamiltonian_rotates() {
        // H = pi |u|^2 at u = (1, 0): grad H = 2 pi u, F = J grad H = (0, 2 pi).
        let f = VectorFieldSpec::Hamiltonian(HamiltonianKind::Quadratic { coeff: PI });
        let out = f.eval_f(0.0, PlanePoint::new(1.0, 0.0));
        assert!((out - PlanePoint::new(0.0, 2.0 * PI)).norm() < 1e-14);
        // DF = 2 pi J.
        let df = f.eval_df(0.0, PlanePoint::new(0.3, 0.4));
        assert!(df.sub(Mat2::J.scale(2.0 * PI)).max_abs() < 1e-14);
    }

    #[test]
    fn linear_rotation_jacobian() {
        let f = VectorFieldSpec::LinearRotation { rate: 2.5 };
        let df = f.eval_df(0.1, PlanePoint::new(-1.0, 3.0));
        assert!(df.sub(Mat2::J.scale(2.5)).max_abs() < 1e-15);
    }

    #[test]
    fn hopf_on_the_cycle_reduces_to_rotation() {
        // At u = (sqrt(mu), 0): V = omega J u, so F = J V = -omega sqrt(mu) e_1.
        let (mu, omega) = (2.0, 0.7);
        let f = VectorFieldSpec::HopfGradientPair { mu, omega };
        let u = PlanePoint::new(mu.sqrt(), 0.0);
        let out = f.eval_f(0.0, u);
        assert!((out - PlanePoint::new(-omega * mu.sqrt(), 0.0)).norm() < 1e-13);
    }

    #[test]
    fn jacobian_check_polynomial_builtins() {
        let hopf = VectorFieldSpec::HopfGradientPair { mu: 1.0, omega: 1.0 };
        assert!(hopf.check_jacobian(100, 1e-5).unwrap() < 1e-7);
        let lin = VectorFieldSpec::LinearRotation { rate: -0.9 };
        assert!(lin.check_jacobian(100, 1e-5).unwrap() < 1e-10);
    }

    #[test]
    fn jacobian_check_pendulum() {
        let f = VectorFieldSpec::Hamiltonian(HamiltonianKind::Pendulum);
        assert!(f.check_jacobian(100, 1e-5).unwrap() < 1e-6);
    }

    #[test]
    fn jacobian_check_scales_second_order() {
        let f = VectorFieldSpec::Hamiltonian(HamiltonianKind::Pendulum);
        let e1 = f.check_jacobian(50, 1e-3).unwrap();
        let e2 = f.check_jacobian(50, 5e-4).unwrap();
        let ratio = e1 / e2;
        assert!((3.5..4.5).contains(&ratio), "ratio {ratio}");
    }

    #[test]
    fn hamiltonian_jacobians_are_j_times_symmetric() {
        // DF = J Hess H, so -J DF = Hess H must be symmetric.
        let fields = [
            VectorFieldSpec::Hamiltonian(HamiltonianKind::Pendulum),
            VectorFieldSpec::Hamiltonian(HamiltonianKind::Quadratic { coeff: 0.8 }),
            VectorFieldSpec::LinearRotation { rate: 1.3 },
        ];
        let mut rng = SplitMix64::new(99);
        for f in &fields {
            for _ in 0..25 {
                let u = PlanePoint::new(rng.uniform(-2.0, 2.0), rng.uniform(-2.0, 2.0));
                let df = f.eval_df(rng.next_f64(), u);
                let sym = Mat2::J.scale(-1.0).mul_mat(df);
                assert!((sym.b - sym.c).abs() <= 1e-12);
            }
        }
    }

    #[test]
    fn custom_field_periodic_in_t_exactly() {
        let f = VectorFieldSpec::Custom(vec![
            PolyTerm { component: 0, p_exp: 2, q_exp: 1, fourier: 3, coeff: 0.5 },
            PolyTerm { component: 1, p_exp: 0, q_exp: 0, fourier: -2, coeff: -1.25 },
        ]);
        let u = PlanePoint::new(0.7, -0.2);
        // Dyadic nodes survive the t+1 shift without rounding, so equality
        // is exact there; grid nodes t_j = j/n_t are all dyadic for the
        // supported n_t.
        for t in [0.0, 0.25, 0.328125, 0.90625] {
            assert_eq!(f.eval_f(t, u), f.eval_f(t + 1.0, u));
            assert_eq!(f.eval_f(t, u), f.eval_f(t + 7.0, u));
        }
        let drift = (f.eval_f(0.33, u) - f.eval_f(1.33, u)).norm();
        assert!(drift < 1e-14);
        assert!(f.check_jacobian(100, 1e-5).unwrap() < 1e-7);
    }

    #[test]
    fn builtin_fields_periodic_in_t() {
        let fields = [
            VectorFieldSpec::Zero,
            VectorFieldSpec::LinearRotation { rate: 1.0 },
            VectorFieldSpec::Hamiltonian(HamiltonianKind::Pendulum),
            VectorFieldSpec::HopfGradientPair { mu: 1.0, omega: 2.0 },
        ];
        let u = PlanePoint::new(0.4, 1.1);
        for f in &fields {
            assert_eq!(f.eval_f(0.25, u), f.eval_f(1.25, u));
        }
    }

    #[test]
    fn check_jacobian_rejects_bad_step() {
        assert!(VectorFieldSpec::Zero.check_jacobian(1, 1e-1).is_err());
        assert!(VectorFieldSpec::Zero.check_jacobian(1, 1e-10).is_err());
    }
}
