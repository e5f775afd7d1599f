//! Differential operators on cylinder fields and grid quadrature.
//!
//! t-derivatives are spectral (the direction is exactly periodic),
//! s-derivatives are second-order finite differences: central in the
//! interior, one-sided second-order on the two boundary lines.

use crate::error::{Error, Result};
use crate::field::Field;
use crate::fourier::Spectral;
use crate::plane::apply_j;

/// s-derivative: second-order central differences, one-sided second-order at
/// the two s-boundaries.
pub fn d_s(u: &Field) -> Field {
    let grid = *u.grid();
    let n_s = grid.n_s;
    let n_t = grid.n_t();
    let inv2ds = 1.0 / (2.0 * grid.ds());
    let mut out = Field::zeros(grid);
    for j in 0..n_t {
        out.set(0, j, (u.at(1, j) * 4.0 - u.at(2, j) - u.at(0, j) * 3.0) * inv2ds);
        out.set(
            n_s - 1,
            j,
            (u.at(n_s - 1, j) * 3.0 - u.at(n_s - 2, j) * 4.0 + u.at(n_s - 3, j)) * inv2ds,
        );
    }
    for i in 1..n_s - 1 {
        for j in 0..n_t {
            out.set(i, j, (u.at(i + 1, j) - u.at(i - 1, j)) * inv2ds);
        }
    }
    out
}

/// Spectral t-derivative applied slice by slice.
pub fn d_t_field(u: &Field) -> Field {
    let grid = *u.grid();
    let plan = Spectral::for_grid(&grid.time);
    let mut out = Field::zeros(grid);
    for i in 0..grid.n_s {
        let dv = plan.derivative(u.slice_at(i));
        for (j, v) in dv.into_iter().enumerate() {
            out.set(i, j, v);
        }
    }
    out
}

/// The operator dbar u = u_s + J u_t.
pub fn apply_dbar(u: &Field) -> Field {
    let us = d_s(u);
    let ut = d_t_field(u);
    combine(&us, &ut, 1.0)
}

/// The operator d u = u_s - J u_t.
pub fn apply_d(u: &Field) -> Field {
    let us = d_s(u);
    let ut = d_t_field(u);
    combine(&us, &ut, -1.0)
}

fn combine(us: &Field, ut: &Field, sign: f64) -> Field {
    let grid = *us.grid();
    let values = us
        .values()
        .iter()
        .zip(ut.values().iter())
        .map(|(&a, &b)| a + apply_j(b) * sign)
        .collect();
    Field::new(grid, values).expect("grids match by construction")
}

/// L2 norm by trapezoidal quadrature in s and rectangle quadrature in t.
pub fn l2_norm(u: &Field) -> f64 {
    let grid = u.grid();
    let ds = grid.ds();
    let dt = grid.time.dt();
    let mut acc = 0.0;
    for i in 0..grid.n_s {
        let w = if i == 0 || i == grid.n_s - 1 { 0.5 } else { 1.0 };
        for v in u.slice_at(i) {
            acc += w * v.norm_sq();
        }
    }
    (acc * ds * dt).sqrt()
}

/// ||grad g|| / ||dbar g|| in L2. For fields supported away from the
/// s-boundaries this ratio is 1: the cross term 2 <g_s, J g_t> integrates to
/// zero, so ||dbar g||^2 = ||g_s||^2 + ||g_t||^2 = ||grad g||^2.
pub fn cz_identity_ratio(g: &Field) -> Result<f64> {
    let gs = d_s(g);
    let gt = d_t_field(g);
    let grad = (l2_norm(&gs).powi(2) + l2_norm(&gt).powi(2)).sqrt();
    let dbar = l2_norm(&apply_dbar(g));
    if dbar < 1e-14 {
        return Err(Error::DegenerateInput(format!(
            "||dbar g|| = {dbar:.3e} is below 1e-14"
        )));
    }
    Ok(grad / dbar)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::{CylinderGrid, TimeGrid};
    use crate::plane::PlanePoint;
    use std::f64::consts::PI;

    fn grid(s_min: f64, s_max: f64, n_s: usize, n_t: usize) -> CylinderGrid {
        CylinderGrid::new(s_min, s_max, n_s, TimeGrid::new(n_t).unwrap()).unwrap()
    }

    /// complex e^{c (s + i t)} as a plane field, c = 2 pi k.
    fn exp_mode(k: f64) -> impl Fn(f64, f64) -> PlanePoint {
        move |s, t| {
            let r = (2.0 * PI * k * s).exp();
            PlanePoint::new(r * (2.0 * PI * k * t).cos(), r * (2.0 * PI * k * t).sin())
        }
    }

    /// complex e^{2 pi i k (t + i s)} = e^{-2 pi k s} e^{2 pi i k t}.
    fn holo_mode(k: f64) -> impl Fn(f64, f64) -> PlanePoint {
        move |s, t| {
            let r = (-2.0 * PI * k * s).exp();
            PlanePoint::new(r * (2.0 * PI * k * t).cos(), r * (2.0 * PI * k * t).sin())
        }
    }

    #[test]
    fn derivatives_of_constant_vanish() {
        let g = grid(-1.0, 1.0, 21, 16);
        let u = Field::constant(g, PlanePoint::new(0.4, -2.0));
        assert!(apply_dbar(&u).sup_norm() < 1e-13);
        assert!(apply_d(&u).sup_norm() < 1e-13);
    }

    #[test]
    fn dbar_kills_exponential_mode() {
        // u = e^{2 pi (s + i t)}: dbar u = 0, d u = 4 pi u.
        let g = grid(0.0, 1.0, 101, 32);
        let u = Field::from_fn(g, exp_mode(1.0));
        let ds2 = g.ds() * g.ds();
        let scale = u.sup_norm();
        let dbar = apply_dbar(&u);
        assert!(dbar.sup_norm() < 150.0 * ds2 * scale, "{}", dbar.sup_norm());

        let d = apply_d(&u);
        let expected = Field::from_fn(g, |s, t| exp_mode(1.0)(s, t) * (4.0 * PI));
        assert!(d.sup_dist(&expected).unwrap() < 150.0 * ds2 * scale);
    }

    #[test]
    fn dbar_error_is_second_order_in_ds() {
        let coarse = grid(0.0, 1.0, 101, 32);
        let fine = grid(0.0, 1.0, 201, 32);
        let e_coarse = apply_dbar(&Field::from_fn(coarse, exp_mode(1.0))).sup_norm();
        let e_fine = apply_dbar(&Field::from_fn(fine, exp_mode(1.0))).sup_norm();
        let ratio = e_coarse / e_fine;
        assert!((3.0..5.0).contains(&ratio), "ratio {ratio}");
    }

    #[test]
    fn d_kills_holomorphic_mode() {
        // u = e^{2 pi i (t + i s)} satisfies u_s = J u_t, so d u = 0.
        let g = grid(0.0, 1.0, 101, 32);
        let u = Field::from_fn(g, holo_mode(1.0));
        let scale = u.sup_norm();
        let ds2 = g.ds() * g.ds();
        assert!(apply_d(&u).sup_norm() < 150.0 * ds2 * scale);
    }

    #[test]
    fn dbar_plus_d_is_twice_s_derivative() {
        let g = grid(-0.5, 0.5, 31, 16);
        let u = Field::from_fn(g, |s, t| {
            PlanePoint::new(
                (s * 3.0).sin() + (2.0 * PI * t).cos(),
                s * s - (4.0 * PI * t).sin(),
            )
        });
        let sum_field = apply_dbar(&u);
        let d_field = apply_d(&u);
        let ds_field = d_s(&u);
        for ((&a, &b), &c) in sum_field
            .values()
            .iter()
            .zip(d_field.values().iter())
            .zip(ds_field.values().iter())
        {
            assert!(((a + b) - c * 2.0).norm() < 1e-12);
        }
    }

    /// Smooth bump in s, vanishing (with all derivatives) near both ends.
    fn bump(s: f64, half_width: f64) -> f64 {
        let x = s / half_width;
        if x.abs() >= 1.0 {
            0.0
        } else {
            (-1.0 / (1.0 - x * x)).exp()
        }
    }

    #[test]
    fn cz_ratio_is_one_for_bump_field() {
        let g = grid(-1.0, 1.0, 400, 64);
        let u = Field::from_fn(g, |s, t| {
            let eta = bump(s, 0.8);
            PlanePoint::new(eta * (2.0 * PI * t).cos(), eta * (2.0 * PI * t).sin())
        });
        let ratio = cz_identity_ratio(&u).unwrap();
        assert!((ratio - 1.0).abs() < 1e-6, "ratio {ratio}");
    }

    #[test]
    fn cz_ratio_analytic_oracle() {
        // Independent oracle: 1-D quadrature of the analytic norms for
        // g = eta(s) (cos 2 pi t, sin 2 pi t):
        //   ||grad g||^2 = int eta'^2 + 4 pi^2 eta^2,
        //   ||dbar g||^2 = int (eta' - 2 pi eta)^2,
        // and int eta' eta = 0 for compactly supported eta, so the ratio is 1.
        let hw = 0.8f64;
        let n = 20000;
        let h = 2.0 / n as f64;
        let eta_prime = |s: f64| {
            let x: f64 = s / hw;
            if x.abs() >= 1.0 {
                0.0
            } else {
                let d = 1.0 - x * x;
                (-1.0 / d).exp() * (-2.0 * x / (d * d)) / hw
            }
        };
        let mut grad_sq = 0.0;
        let mut dbar_sq = 0.0;
        for i in 0..=n {
            let s = -1.0 + i as f64 * h;
            let w = if i == 0 || i == n { 0.5 } else { 1.0 };
            let e = bump(s, hw);
            let ep = eta_prime(s);
            grad_sq += w * (ep * ep + 4.0 * PI * PI * e * e);
            dbar_sq += w * (ep - 2.0 * PI * e).powi(2);
        }
        let ratio = (grad_sq / dbar_sq).sqrt();
        assert!((ratio - 1.0).abs() < 1e-9, "analytic ratio {ratio}");
    }

    #[test]
    fn cz_ratio_rejects_zero_field() {
        let g = grid(-1.0, 1.0, 50, 16);
        let u = Field::zeros(g);
        assert!(matches!(cz_identity_ratio(&u), Err(Error::DegenerateInput(_))));
    }

    #[test]
    fn cz_ratio_for_random_band_limited_field() {
        let g = grid(-1.0, 1.0, 400, 64);
        // Deterministic pseudo-random band-limited t-content under a bump.
        let coef = [(1i32, 0.7, 0.2), (2, -0.4, 0.9), (5, 0.15, -0.3)];
        let u = Field::from_fn(g, |s, t| {
            let eta = bump(s, 0.75);
            let mut p = 0.0;
            let mut q = 0.0;
            for &(k, a, b) in &coef {
                let th = 2.0 * PI * k as f64 * t;
                p += a * th.cos() + b * th.sin();
                q += b * th.cos() - a * th.sin();
            }
            PlanePoint::new(eta * p, eta * q)
        });
        let ratio = cz_identity_ratio(&u).unwrap();
        assert!((ratio - 1.0).abs() < 1e-5, "ratio {ratio}");
    }
}
