//! Newton solver for the nonlinear Cauchy-Riemann boundary-value problem
//! u_s - J(u_t - F(t, u)) = 0 on a truncated cylinder.
//!
//! Two boundary treatments: clamped loops at both window ends, or s-periodic
//! with the period as an extra unknown pinned by a scalar phase anchor. The
//! linear step is solved by restarted GMRES on the discretized linearization
//! (block-banded in s, dense-circulant in t) with a per-t-mode preconditioner.

mod gmres;
mod precond;

pub use gmres::{gmres, GmresConfig, GmresResult, LinearOperator};
pub use precond::ModePreconditioner;

/// Stabilization weight of the preconditioner's tridiagonal factorizations.
/// It keeps the factorizations nonsingular on the parity-decoupled modes and
/// perturbs the preconditioned operator by O(kappa * ds) only.
const PRECOND_KAPPA: f64 = 0.05;

use crate::error::{Error, Result};
use crate::field::{Field, Loop};
use crate::fourier::Spectral;
use crate::grid::CylinderGrid;
use crate::ops::{d_s, d_t_field};
use crate::plane::{apply_j, Mat2, PlanePoint};
use crate::vectorfield::VectorFieldSpec;
use num_complex::Complex64;
use std::cell::RefCell;

/// Nodewise residual R(u) = u_s - J u_t + J F(t, u) with the shared
/// s-derivative convention (central inside, one-sided second order at the two
/// boundary lines). Inside the solver the boundary rows carry the
/// boundary-condition defect instead.
pub fn cr_residual(spec: &VectorFieldSpec, u: &Field) -> Field {
    let us = d_s(u);
    let ut = d_t_field(u);
    let grid = *u.grid();
    let n_t = grid.n_t();
    let values = us
        .values()
        .iter()
        .zip(ut.values().iter())
        .zip(u.values().iter())
        .enumerate()
        .map(|(node, ((&a, &b), &x))| {
            let t = grid.time.node(node % n_t);
            a - apply_j(b) + apply_j(spec.eval_f(t, x))
        })
        .collect();
    Field::new(grid, values).expect("residual matches the input grid")
}

/// Directional derivative of `cr_residual` at u applied to v:
/// v_s - J v_t + J DF(t, u) v.
pub fn cr_linearized_apply(spec: &VectorFieldSpec, u: &Field, v: &Field) -> Result<Field> {
    if u.grid() != v.grid() {
        return Err(Error::GridMismatch("linearization needs matching grids".into()));
    }
    let vs = d_s(v);
    let vt = d_t_field(v);
    let grid = *u.grid();
    let n_t = grid.n_t();
    let values = vs
        .values()
        .iter()
        .zip(vt.values().iter())
        .zip(u.values().iter().zip(v.values().iter()))
        .enumerate()
        .map(|(node, ((&a, &b), (&x, &w)))| {
            let t = grid.time.node(node % n_t);
            a - apply_j(b) + apply_j(spec.eval_df(t, x).mul_vec(w))
        })
        .collect();
    Field::new(grid, values).map_err(|e| e)
}

#[derive(Debug, Clone)]
pub enum BoundaryCondition {
    /// Dirichlet loop clamps at both window ends.
    FixedLoops { left: Loop, right: Loop },
    /// s-periodic window with unknown period; the input window spans one
    /// period of the initial ansatz and the stored anchor fixes the phase.
    SPeriodic { period_guess: f64 },
}

#[derive(Debug, Clone)]
pub struct SolverConfig {
    /// Sup-norm residual target.
    pub tol: f64,
    pub max_iter: usize,
    pub gmres: GmresConfig,
    /// Backtracking floor, applied as factors 1, 1/2, ... down to this value.
    pub damping_floor: f64,
    /// The bounded-solution constant C; iterates are rejected beyond 10 C.
    pub bound: f64,
    /// Allowed boundary defect of the initial field.
    pub bc_slack: f64,
    /// Optional undivided second-difference weight for the discrete system,
    /// annealed to zero in stages. The converged system is always the pure
    /// central discretization; a nonzero value only eases the global phase
    /// of stiff problems.
    pub stabilization: f64,
    /// Inexact-Newton forcing: each linear solve targets a relative residual
    /// of forcing * |R|_sup (clamped to [forcing_floor, 0.1]).
    pub forcing: f64,
    /// Lower clamp on the forcing tolerance. Keeping the linear solves away
    /// from machine accuracy also keeps near-singular directions (front
    /// translations of long connecting orbits) out of the step.
    pub forcing_floor: f64,
    /// Trust cap on the sup-norm of a Newton step.
    pub max_step: f64,
}

impl Default for SolverConfig {
    fn default() -> Self {
        SolverConfig {
            tol: 1e-9,
            max_iter: 25,
            gmres: GmresConfig::default(),
            damping_floor: 2f64.powi(-10),
            bound: 1.0,
            bc_slack: 1e-6,
            stabilization: 0.0,
            forcing: 1e-4,
            forcing_floor: 1e-5,
            max_step: 1.0,
        }
    }
}

#[derive(Debug, Clone)]
pub struct SolveReport {
    pub field: Field,
    pub residual_sup: f64,
    pub newton_iterations: usize,
    pub converged: bool,
    /// Corrected period for s-periodic problems.
    pub period: Option<f64>,
    /// Sup residual after each accepted step, starting with the initial one.
    pub residual_history: Vec<f64>,
    pub message: Option<String>,
}

enum Kind {
    Fixed { left: Vec<PlanePoint>, right: Vec<PlanePoint> },
    Periodic { anchor_value: f64 },
}

struct System<'a> {
    spec: &'a VectorFieldSpec,
    grid: CylinderGrid,
    n_lines: usize,
    ds: f64,
    /// Undivided second-difference weight added to the equation rows: an
    /// O(ds^2)-consistent stabilization that removes the parasitic
    /// checkerboard modes of pure central differencing. The solver anneals
    /// it to zero in stages, so the converged system is the pure central
    /// discretization.
    kappa: std::cell::Cell<f64>,
    plan: Spectral,
    t_nodes: Vec<f64>,
    kind: Kind,
    scratch: RefCell<Vec<Complex64>>,
}

#[inline]
fn flat(i: usize, j: usize, n_t: usize) -> usize {
    2 * (i * n_t + j)
}

impl<'a> System<'a> {
    fn dim(&self) -> usize {
        let base = 2 * self.n_lines * self.grid.n_t();
        match self.kind {
            Kind::Fixed { .. } => base,
            Kind::Periodic { .. } => base + 1,
        }
    }

    fn line_dt(&self, x: &[f64], i: usize, out: &mut [Complex64]) {
        let n_t = self.grid.n_t();
        for (j, o) in out.iter_mut().enumerate() {
            let base = flat(i, j, n_t);
            *o = Complex64::new(x[base], x[base + 1]);
        }
        self.plan.forward(out);
        self.plan.differentiate_spectrum(out);
        self.plan.inverse(out);
    }

    fn residual(&self, x: &[f64], out: &mut [f64]) {
        let n_t = self.grid.n_t();
        let inv2 = 1.0 / (2.0 * self.ds);
        let mut dt = self.scratch.borrow_mut();
        dt.resize(n_t, Complex64::new(0.0, 0.0));
        match &self.kind {
            Kind::Fixed { left, right } => {
                let last = self.n_lines - 1;
                for j in 0..n_t {
                    let b = flat(0, j, n_t);
                    out[b] = x[b] - left[j].p;
                    out[b + 1] = x[b + 1] - left[j].q;
                    let b = flat(last, j, n_t);
                    out[b] = x[b] - right[j].p;
                    out[b + 1] = x[b + 1] - right[j].q;
                }
                let k = self.kappa.get();
                for i in 1..last {
                    self.line_dt(x, i, &mut dt);
                    for j in 0..n_t {
                        let b = flat(i, j, n_t);
                        let up = flat(i + 1, j, n_t);
                        let dn = flat(i - 1, j, n_t);
                        let u = PlanePoint::new(x[b], x[b + 1]);
                        let jdt = apply_j(PlanePoint::new(dt[j].re, dt[j].im));
                        let jf = apply_j(self.spec.eval_f(self.t_nodes[j], u));
                        out[b] = (x[up] - x[dn]) * inv2 - jdt.p + jf.p
                            + k * (x[up] - 2.0 * x[b] + x[dn]);
                        out[b + 1] = (x[up + 1] - x[dn + 1]) * inv2 - jdt.q + jf.q
                            + k * (x[up + 1] - 2.0 * x[b + 1] + x[dn + 1]);
                    }
                }
            }
            Kind::Periodic { anchor_value } => {
                let n = self.n_lines;
                let period = x[self.dim() - 1];
                let k = self.kappa.get();
                for i in 0..n {
                    self.line_dt(x, i, &mut dt);
                    let ip = (i + 1) % n;
                    let im = (i + n - 1) % n;
                    for j in 0..n_t {
                        let b = flat(i, j, n_t);
                        let up = flat(ip, j, n_t);
                        let dn = flat(im, j, n_t);
                        let u = PlanePoint::new(x[b], x[b + 1]);
                        let jdt = apply_j(PlanePoint::new(dt[j].re, dt[j].im));
                        let jf = apply_j(self.spec.eval_f(self.t_nodes[j], u));
                        out[b] = (x[up] - x[dn]) * inv2 - period * (jdt.p - jf.p)
                            + k * (x[up] - 2.0 * x[b] + x[dn]);
                        out[b + 1] = (x[up + 1] - x[dn + 1]) * inv2
                            - period * (jdt.q - jf.q)
                            + k * (x[up + 1] - 2.0 * x[b + 1] + x[dn + 1]);
                    }
                }
                out[self.dim() - 1] = x[1] - anchor_value;
            }
        }
    }

    fn freeze(&'a self, x: &[f64]) -> FrozenJacobian<'a> {
        let n_t = self.grid.n_t();
        let mut df = Vec::with_capacity(self.n_lines * n_t);
        for i in 0..self.n_lines {
            for j in 0..n_t {
                let b = flat(i, j, n_t);
                let u = PlanePoint::new(x[b], x[b + 1]);
                df.push(self.spec.eval_df(self.t_nodes[j], u));
            }
        }
        let (period, t_col) = match self.kind {
            Kind::Fixed { .. } => (1.0, Vec::new()),
            Kind::Periodic { .. } => {
                let period = x[self.dim() - 1];
                // dR/dT = -(J u_t - J F) at the frozen state.
                let mut col = vec![0.0; self.dim()];
                let mut dt = self.scratch.borrow_mut();
                dt.resize(n_t, Complex64::new(0.0, 0.0));
                for i in 0..self.n_lines {
                    self.line_dt(x, i, &mut dt);
                    for j in 0..n_t {
                        let b = flat(i, j, n_t);
                        let u = PlanePoint::new(x[b], x[b + 1]);
                        let jdt = apply_j(PlanePoint::new(dt[j].re, dt[j].im));
                        let jf = apply_j(self.spec.eval_f(self.t_nodes[j], u));
                        col[b] = -(jdt.p - jf.p);
                        col[b + 1] = -(jdt.q - jf.q);
                    }
                }
                (period, col)
            }
        };
        FrozenJacobian { sys: self, df, period, t_col }
    }
}

/// The discretized linearization at a frozen iterate.
struct FrozenJacobian<'a> {
    sys: &'a System<'a>,
    df: Vec<Mat2>,
    period: f64,
    t_col: Vec<f64>,
}

impl LinearOperator for FrozenJacobian<'_> {
    fn dim(&self) -> usize {
        self.sys.dim()
    }

    fn apply(&self, v: &[f64], out: &mut [f64]) {
        let n_t = self.sys.grid.n_t();
        let inv2 = 1.0 / (2.0 * self.sys.ds);
        let mut dt = self.sys.scratch.borrow_mut();
        dt.resize(n_t, Complex64::new(0.0, 0.0));
        match &self.sys.kind {
            Kind::Fixed { .. } => {
                let last = self.sys.n_lines - 1;
                for j in 0..n_t {
                    let b = flat(0, j, n_t);
                    out[b] = v[b];
                    out[b + 1] = v[b + 1];
                    let b = flat(last, j, n_t);
                    out[b] = v[b];
                    out[b + 1] = v[b + 1];
                }
                let k = self.sys.kappa.get();
                for i in 1..last {
                    self.sys.line_dt(v, i, &mut dt);
                    for j in 0..n_t {
                        let b = flat(i, j, n_t);
                        let up = flat(i + 1, j, n_t);
                        let dn = flat(i - 1, j, n_t);
                        let w = PlanePoint::new(v[b], v[b + 1]);
                        let jdt = apply_j(PlanePoint::new(dt[j].re, dt[j].im));
                        let jdf = apply_j(self.df[i * n_t + j].mul_vec(w));
                        out[b] = (v[up] - v[dn]) * inv2 - jdt.p + jdf.p
                            + k * (v[up] - 2.0 * v[b] + v[dn]);
                        out[b + 1] = (v[up + 1] - v[dn + 1]) * inv2 - jdt.q + jdf.q
                            + k * (v[up + 1] - 2.0 * v[b + 1] + v[dn + 1]);
                    }
                }
            }
            Kind::Periodic { .. } => {
                let n = self.sys.n_lines;
                let dim = self.sys.dim();
                let tau = v[dim - 1];
                let k = self.sys.kappa.get();
                for i in 0..n {
                    self.sys.line_dt(v, i, &mut dt);
                    let ip = (i + 1) % n;
                    let im = (i + n - 1) % n;
                    for j in 0..n_t {
                        let b = flat(i, j, n_t);
                        let up = flat(ip, j, n_t);
                        let dn = flat(im, j, n_t);
                        let w = PlanePoint::new(v[b], v[b + 1]);
                        let jdt = apply_j(PlanePoint::new(dt[j].re, dt[j].im));
                        let jdf = apply_j(self.df[i * n_t + j].mul_vec(w));
                        out[b] = (v[up] - v[dn]) * inv2 - self.period * (jdt.p - jdf.p)
                            + tau * self.t_col[b]
                            + k * (v[up] - 2.0 * v[b] + v[dn]);
                        out[b + 1] = (v[up + 1] - v[dn + 1]) * inv2
                            - self.period * (jdt.q - jdf.q)
                            + tau * self.t_col[b + 1]
                            + k * (v[up + 1] - 2.0 * v[b + 1] + v[dn + 1]);
                    }
                }
                out[dim - 1] = v[1];
            }
        }
    }
}


// Line search on the s-position of the profile between the clamped ends,
// over exact integer grid shifts (no resampling error). Long connecting
// orbits have an exponentially soft translation mode that linear steps handle
// badly; moving the front directly is robust against it. Returns true when
// the iterate improved.
fn translation_polish(
    sys: &System,
    x: &mut [f64],
    r: &mut [f64],
    r_sup: &mut f64,
    bound: f64,
) -> bool {
    let n_t = sys.grid.n_t();
    let n_lines = sys.n_lines;
    let last = n_lines - 1;
    let dim = x.len();
    let max_shift = (n_lines / 4).max(1) as i64;

    let n_values = n_lines * n_t;
    let mut trial = vec![0.0; dim];
    let mut r_trial = vec![0.0; dim];
    let eval = |m: i64, trial: &mut [f64], r_trial: &mut [f64]| -> f64 {
        trial.copy_from_slice(x);
        for i in 1..last {
            let src_line = (i as i64 - m).clamp(0, last as i64) as usize;
            for j in 0..n_t {
                let b = flat(i, j, n_t);
                let a = flat(src_line, j, n_t);
                trial[b] = x[a];
                trial[b + 1] = x[a + 1];
            }
        }
        if field_sup(trial, n_values) > 10.0 * bound {
            return f64::INFINITY;
        }
        sys.residual(trial, r_trial);
        sup_norm(r_trial)
    };

    // Coarse doubling scan in both directions, then refine around the best.
    let mut best_m = 0i64;
    let mut best = *r_sup;
    let mut m = 1i64;
    while m <= max_shift {
        for cand in [m, -m] {
            let val = eval(cand, &mut trial, &mut r_trial);
            if val < best {
                best = val;
                best_m = cand;
            }
        }
        m *= 2;
    }
    loop {
        let mut improved = false;
        for cand in [best_m - 1, best_m + 1] {
            if cand.unsigned_abs() > max_shift as u64 {
                continue;
            }
            let val = eval(cand, &mut trial, &mut r_trial);
            if val < best {
                best = val;
                best_m = cand;
                improved = true;
            }
        }
        if !improved {
            break;
        }
    }
    if best_m != 0 && best < *r_sup * (1.0 - 1e-3) {
        let final_val = eval(best_m, &mut trial, &mut r_trial);
        x.copy_from_slice(&trial);
        r.copy_from_slice(&r_trial);
        *r_sup = final_val;
        true
    } else {
        false
    }
}

fn sup_norm(v: &[f64]) -> f64 {
    v.iter().fold(0.0f64, |m, &x| m.max(x.abs()))
}

fn field_sup(x: &[f64], n_values: usize) -> f64 {
    let mut m = 0.0f64;
    for k in 0..n_values {
        m = m.max(PlanePoint::new(x[2 * k], x[2 * k + 1]).norm());
    }
    m
}

/// Damped Newton iteration on the discretized boundary-value problem.
///
/// Returns the best iterate with `converged = false` on failure; hard errors
/// are reserved for inconsistent inputs.
pub fn newton_solve(
    spec: &VectorFieldSpec,
    initial: &Field,
    bc: &BoundaryCondition,
    cfg: &SolverConfig,
) -> Result<SolveReport> {
    let grid = *initial.grid();
    let n_t = grid.n_t();

    let (n_lines, kind) = match bc {
        BoundaryCondition::FixedLoops { left, right } => {
            if *left.time() != grid.time || *right.time() != grid.time {
                return Err(Error::GridMismatch(
                    "boundary loops must live on the field's time grid".into(),
                ));
            }
            let defect = initial
                .loop_at(0)
                .sup_dist(left)?
                .max(initial.loop_at(grid.n_s - 1).sup_dist(right)?);
            if defect > cfg.bc_slack {
                return Err(Error::BoundaryDefect { defect, slack: cfg.bc_slack });
            }
            (grid.n_s, Kind::Fixed { left: left.values().to_vec(), right: right.values().to_vec() })
        }
        BoundaryCondition::SPeriodic { period_guess } => {
            if *period_guess <= 0.0 {
                return Err(Error::InvalidParameter("period guess must be positive".into()));
            }
            if grid.n_s < 9 {
                return Err(Error::InvalidGrid(
                    "s-periodic problems need at least 9 s-lines".into(),
                ));
            }
            // Anchor the phase at the first stored node.
            let anchor_value = initial.at(0, 0).q;
            (grid.n_s - 1, Kind::Periodic { anchor_value })
        }
    };

    let ds = match bc {
        BoundaryCondition::FixedLoops { .. } => grid.ds(),
        BoundaryCondition::SPeriodic { .. } => 1.0 / n_lines as f64,
    };
    let sys = System {
        spec,
        grid,
        n_lines,
        ds,
        kappa: std::cell::Cell::new(cfg.stabilization),
        plan: Spectral::new(n_t),
        t_nodes: grid.time.nodes().collect(),
        kind,
        scratch: RefCell::new(Vec::new()),
    };
    let dim = sys.dim();
    let n_values = n_lines * n_t;

    // Pack the initial iterate.
    let mut x = vec![0.0; dim];
    for i in 0..n_lines {
        for (j, &v) in initial.slice_at(i).iter().enumerate() {
            let b = flat(i, j, n_t);
            x[b] = v.p;
            x[b + 1] = v.q;
        }
    }
    if let BoundaryCondition::SPeriodic { period_guess } = bc {
        x[dim - 1] = *period_guess;
    }
    if field_sup(&x, n_values) > 10.0 * cfg.bound {
        return Err(Error::Precondition(format!(
            "initial field exceeds 10 x bound = {}",
            10.0 * cfg.bound
        )));
    }

    // Stabilization continuation: solve with the full kappa first (uniformly
    // nonsingular system), then anneal it to zero reusing each solution, so
    // the final stage is the pure central-difference problem.
    let mut kappa_stages = vec![cfg.stabilization];
    if *kappa_stages.last().unwrap() != 0.0 {
        kappa_stages.push(0.0);
    }
    kappa_stages.dedup();

    let mut r = vec![0.0; dim];
    let mut history = Vec::new();
    let mut iterations = 0;
    let mut message = None;
    let mut r_sup = f64::INFINITY;

    let n_stages = kappa_stages.len();
    for (stage, &kappa) in kappa_stages.iter().enumerate() {
        let final_stage = stage + 1 == n_stages;
        // Warm-up stages only need to park the iterate near the unique
        // stabilized solution; the final (pure) stage owns the tolerance.
        let stage_tol = if final_stage { cfg.tol } else { cfg.tol.max(1e-6) };
        let stage_iters = if final_stage { cfg.max_iter } else { cfg.max_iter / 3 + 1 };
        sys.kappa.set(kappa);
        sys.residual(&x, &mut r);
        r_sup = sup_norm(&r);
        if stage == 0 {
            history.push(r_sup);
        }
        let mut stage_done = false;

    for _ in 0..stage_iters {
        if r_sup <= stage_tol {
            stage_done = true;
            break;
        }
        let jac = sys.freeze(&x);
        // The preconditioner carries the complex-commuting part of the
        // frozen zeroth-order coefficient, averaged per line.
        let line_shift: Vec<Complex64> = (0..n_lines)
            .map(|i| {
                let mut m = Mat2::ZERO;
                for j in 0..n_t {
                    m = m.add(Mat2::J.mul_mat(jac.df[i * n_t + j]));
                }
                let m = m.scale(jac.period / n_t as f64);
                Complex64::new(0.5 * (m.a + m.d), 0.5 * (m.c - m.b))
            })
            .collect();
        let pre = match &sys.kind {
            Kind::Fixed { .. } => ModePreconditioner::fixed(
                n_lines,
                n_t,
                ds,
                1.0,
                PRECOND_KAPPA,
                &line_shift,
            ),
            Kind::Periodic { .. } => ModePreconditioner::cyclic(
                n_lines,
                n_t,
                ds,
                jac.period,
                PRECOND_KAPPA,
                &line_shift,
            ),
        };
        let rhs: Vec<f64> = r.iter().map(|v| -v).collect();
        // Inexact-Newton forcing: solve the linear system only as far as the
        // outer residual warrants. This also keeps near-singular directions
        // (translation modes of long connecting orbits) from polluting the
        // step.
        let eta = (cfg.forcing * r_sup).clamp(cfg.forcing_floor.max(cfg.gmres.tol), 0.1);

        // Descending budget ladder: the full-accuracy solve first; when its
        // step fails backtracking (near-singular directions entering the
        // Krylov space produce steps whose linearization is invalid at the
        // delivered magnitude), retry with hard truncation, which keeps that
        // junk out.
        let mut stagnated = false;
        let mut budgets = vec![cfg.gmres.max_iter];
        for b in [48usize, 24, 12] {
            if b < cfg.gmres.max_iter {
                budgets.push(b);
            }
        }
        let mut accepted = false;
        let mut ladder = budgets.into_iter();
        loop {
            let budget = match ladder.next() {
                Some(b) => b,
                None => break,
            };
            let gmres_cfg =
                GmresConfig { tol: eta, max_iter: budget, ..cfg.gmres.clone() };
            let lin = gmres(&jac, Some(&pre), &rhs, &gmres_cfg);
            if std::env::var("CRLAB_SOLVER_TRACE").is_ok() {
                eprintln!(
                    "newton iter {iterations}: r_sup={r_sup:.3e} eta={eta:.2e} budget={budget} gmres iters={} rel={:.3e} |d|={:.3e}",
                    lin.iterations, lin.residual, sup_norm(&lin.x),
                );
            }
            if lin.residual > 0.5 && budget >= cfg.gmres.max_iter {
                stagnated = true;
                message = Some(format!(
                    "linear solver stagnated at relative residual {:.3e}",
                    lin.residual
                ));
                break;
            }

            let mut raw_step = lin.x;
            // Clamped connecting orbits carry an exponentially soft
            // translation mode; when the profile's s-derivative direction is
            // measurably soft under the Jacobian, remove it from the step
            // (the translation line search owns that direction instead).
            if matches!(sys.kind, Kind::Fixed { .. }) {
                let inv2 = 1.0 / (2.0 * ds);
                let mut w = vec![0.0; dim];
                for i in 1..n_lines - 1 {
                    for j in 0..n_t {
                        let b = flat(i, j, n_t);
                        let up = flat(i + 1, j, n_t);
                        let dn = flat(i - 1, j, n_t);
                        w[b] = (x[up] - x[dn]) * inv2;
                        w[b + 1] = (x[up + 1] - x[dn + 1]) * inv2;
                    }
                }
                let w_norm = w.iter().map(|v| v * v).sum::<f64>().sqrt();
                if w_norm > 1e-14 {
                    for v in w.iter_mut() {
                        *v /= w_norm;
                    }
                    let mut jw = vec![0.0; dim];
                    jac.apply(&w, &mut jw);
                    let sigma = jw.iter().map(|v| v * v).sum::<f64>().sqrt();
                    if sigma < 1e-3 {
                        let coeff: f64 =
                            w.iter().zip(raw_step.iter()).map(|(a, b)| a * b).sum();
                        for (d, wi) in raw_step.iter_mut().zip(w.iter()) {
                            *d -= coeff * wi;
                        }
                    }
                }
            }

            // Trust cap before backtracking.
            let step_sup = sup_norm(&raw_step);
            let cap = if step_sup > cfg.max_step { cfg.max_step / step_sup } else { 1.0 };
            let step: Vec<f64> = raw_step.iter().map(|d| d * cap).collect();

            let mut alpha = 1.0f64;
            let mut trial = vec![0.0; dim];
            let mut r_trial = vec![0.0; dim];
            while alpha >= cfg.damping_floor {
                for (t, (xi, di)) in trial.iter_mut().zip(x.iter().zip(step.iter())) {
                    *t = xi + alpha * di;
                }
                let in_bounds = field_sup(&trial, n_values) <= 10.0 * cfg.bound
                    && (!matches!(sys.kind, Kind::Periodic { .. }) || trial[dim - 1] > 0.0);
                if in_bounds {
                    sys.residual(&trial, &mut r_trial);
                    let sup = sup_norm(&r_trial);
                    if sup.is_finite() && sup < r_sup {
                        x.copy_from_slice(&trial);
                        r.copy_from_slice(&r_trial);
                        r_sup = sup;
                        accepted = true;
                        break;
                    }
                }
                alpha *= 0.5;
            }
            if accepted {
                break;
            }
        }
        if stagnated {
            break;
        }
        // Clamped problems get a direct line search on the profile's
        // s-translation, the soft direction of long connecting orbits.
        let polished = if matches!(sys.kind, Kind::Fixed { .. }) {
            translation_polish(&sys, &mut x, &mut r, &mut r_sup, cfg.bound)
        } else {
            false
        };
        if !accepted && !polished {
            // Progress exhausted at this stabilization level; hand the
            // iterate to the next stage.
            message = Some("backtracking reached the damping floor".into());
            break;
        }
        message = None;
        iterations += 1;
        history.push(r_sup);
    }

        if std::env::var("CRLAB_SOLVER_TRACE").is_ok() {
            eprintln!("stage kappa={kappa:.1e}: r_sup={r_sup:.3e} done={stage_done}");
        }
    }

    // Canonical representative for problems whose pure central system is
    // singular: with zero field Jacobian and an odd line count, central
    // differencing with two clamped rows has an exact checkerboard kernel
    // (constants on the unclamped parity chain in the t-mean and Nyquist
    // patterns). Sweep those components out when they really are kernel
    // vectors, so equal boundary data always produces the same field.
    if matches!(sys.kind, Kind::Fixed { .. }) && n_lines % 2 == 1 {
        let jac = sys.freeze(&x);
        let mut jv = vec![0.0; dim];
        for pattern in 0..4usize {
            let mut v = vec![0.0; dim];
            let mut norm_sq = 0.0f64;
            for i in (1..n_lines - 1).step_by(2) {
                for j in 0..n_t {
                    let sign = if pattern >= 2 && j % 2 == 1 { -1.0 } else { 1.0 };
                    let b = flat(i, j, n_t) + (pattern % 2);
                    v[b] = sign;
                    norm_sq += 1.0;
                }
            }
            if norm_sq == 0.0 {
                continue;
            }
            jac.apply(&v, &mut jv);
            let image = jv.iter().map(|a| a * a).sum::<f64>().sqrt();
            if image < 1e-12 * norm_sq.sqrt() {
                let coeff: f64 =
                    x.iter().zip(v.iter()).map(|(a, b)| a * b).sum::<f64>() / norm_sq;
                for (xi, vi) in x.iter_mut().zip(v.iter()) {
                    *xi -= coeff * vi;
                }
            }
        }
        sys.residual(&x, &mut r);
        r_sup = sup_norm(&r);
    }

    let best_x = x;
    let best_r = r_sup;
    let converged = best_r <= cfg.tol;
    if !converged && message.is_none() {
        message = Some("iteration budget exhausted".into());
    }

    // Materialize the best iterate as a field.
    let (out_grid, period) = match bc {
        BoundaryCondition::FixedLoops { .. } => (grid, None),
        BoundaryCondition::SPeriodic { .. } => {
            let t_final = best_x[dim - 1];
            let g = CylinderGrid::new(grid.s_min, grid.s_min + t_final, grid.n_s, grid.time)?;
            (g, Some(t_final))
        }
    };
    let mut values = Vec::with_capacity(out_grid.node_count());
    for i in 0..n_lines {
        for j in 0..n_t {
            let b = flat(i, j, n_t);
            values.push(PlanePoint::new(best_x[b], best_x[b + 1]));
        }
    }
    if matches!(bc, BoundaryCondition::SPeriodic { .. }) {
        // Duplicate the first line to close the stored window.
        for j in 0..n_t {
            let b = flat(0, j, n_t);
            values.push(PlanePoint::new(best_x[b], best_x[b + 1]));
        }
    }
    let field = Field::new(out_grid, values)?;

    Ok(SolveReport {
        field,
        residual_sup: best_r,
        newton_iterations: iterations,
        converged,
        period,
        residual_history: history,
        message,
    })
}
