//! Analytic test fields: closed-form solutions and scenario pairs that
//! exercise the analytics without a solver run.

use crate::error::Result;
use crate::field::{Field, Loop};
use crate::grid::{CylinderGrid, TimeGrid};
use crate::plane::{apply_j, PlanePoint};
use crate::rng::SplitMix64;
use crate::vectorfield::VectorFieldSpec;
use std::f64::consts::PI;

/// The decaying holomorphic mode e^{2 pi i (t + i s)}: an exact solution of
/// the cylinder equation for F = Zero with u_s = J u_t.
pub fn holomorphic_mode(grid: CylinderGrid) -> Field {
    Field::from_fn(grid, |s, t| {
        let r = (-2.0 * PI * s).exp();
        PlanePoint::new(r * (2.0 * PI * t).cos(), r * (2.0 * PI * t).sin())
    })
}

/// A circle loop: center + radius * (cos 2 pi k t, sin 2 pi k t).
pub fn circle_loop(time: TimeGrid, center: PlanePoint, radius: f64, turns: i64) -> Loop {
    Loop::from_fn(time, move |t| {
        let th = 2.0 * PI * turns as f64 * t;
        center + PlanePoint::new(radius * th.cos(), radius * th.sin())
    })
}

/// The crossing pair: a constant field at (1/2, 0) against the holomorphic
/// mode. Their difference loop is a circle of radius e^{-2 pi s} about
/// (1/2, 0), so the winding drops from 1 to 0 at s* = ln 2 / 2 pi, t* = 0.
pub fn crossing_pair(grid: CylinderGrid) -> (Field, Field) {
    (
        Field::constant(grid, PlanePoint::new(0.5, 0.0)),
        holomorphic_mode(grid),
    )
}

/// t-independent transient of the planar flow u_s = V(u) induced by a field
/// spec on t-independent data (u_s = -J F(u)), integrated with RK4 from `u0`
/// across the grid window. For the Hopf builtin this spirals onto the limit
/// cycle of radius sqrt(mu).
pub fn planar_transient(grid: CylinderGrid, spec: &VectorFieldSpec, u0: PlanePoint) -> Result<Field> {
    let n_s = grid.n_s;
    let h = grid.ds();
    let rhs = |u: PlanePoint| -apply_j(spec.eval_f(0.0, u));
    let mut u = u0;
    let mut profile = Vec::with_capacity(n_s);
    profile.push(u);
    for _ in 1..n_s {
        let k1 = rhs(u);
        let k2 = rhs(u + k1 * (0.5 * h));
        let k3 = rhs(u + k2 * (0.5 * h));
        let k4 = rhs(u + k3 * h);
        u = u + (k1 + (k2 + k3) * 2.0 + k4) * (h / 6.0);
        profile.push(u);
    }
    let n_t = grid.n_t();
    let mut values = Vec::with_capacity(grid.node_count());
    for p in profile {
        for _ in 0..n_t {
            values.push(p);
        }
    }
    Field::new(grid, values)
}

/// Deterministic band-limited bump: smooth compact s-support, a few t-modes,
/// suitable for the gradient/dbar norm identity.
pub fn random_bump(grid: CylinderGrid, seed: u64) -> Field {
    let mut rng = SplitMix64::new(seed);
    let modes: Vec<(i64, f64, f64)> = (1..=4)
        .map(|k| (k, rng.uniform(-1.0, 1.0), rng.uniform(-1.0, 1.0)))
        .collect();
    let mid = 0.5 * (grid.s_min + grid.s_max);
    let half = 0.4 * (grid.s_max - grid.s_min);
    Field::from_fn(grid, move |s, t| {
        let x = (s - mid) / half;
        let eta = if x.abs() >= 1.0 { 0.0 } else { (-1.0 / (1.0 - x * x)).exp() };
        let mut p = 0.0;
        let mut q = 0.0;
        for &(k, a, b) in &modes {
            let th = 2.0 * PI * k as f64 * t;
            p += a * th.cos() + b * th.sin();
            q += b * th.cos() - a * th.sin();
        }
        PlanePoint::new(eta * p, eta * q)
    })
}
