//! Equilibria of the translation flow: 1-periodic solutions of u_t = F(t, u),
//! found by Newton shooting on the period map with the exact variational
//! Jacobian, plus Floquet multipliers of the monodromy.

use crate::error::{Error, Result};
use crate::field::Loop;
use crate::grid::TimeGrid;
use crate::plane::{Mat2, PlanePoint};
use crate::vectorfield::VectorFieldSpec;
use num_complex::Complex64;
use serde::Serialize;

/// Trajectories leaving this radius abort integration with a divergence error.
pub const DEFAULT_ESCAPE_RADIUS: f64 = 1e6;

const NEWTON_MAX_ITER: usize = 60;
const SINGULAR_DET_TOL: f64 = 1e-12;

/// A 1-periodic orbit of u_t = F(t, u), sampled on a TimeGrid.
#[derive(Debug, Clone)]
pub struct Equilibrium {
    pub orbit: Loop,
    /// Starting point u(0).
    pub u0: PlanePoint,
    /// sup over grid nodes of |u_t - F(t, u)| with the spectral t-derivative.
    pub residual: f64,
    pub monodromy: Mat2,
    pub floquet: (Complex64, Complex64),
    /// Integral of trace DF along the orbit over one period, for the
    /// Liouville identity det(monodromy) = exp of this.
    pub trace_integral: f64,
}

impl Equilibrium {
    /// |det M - exp(int tr DF)| / |exp(int tr DF)|.
    pub fn liouville_defect(&self) -> f64 {
        let expected = self.trace_integral.exp();
        (self.monodromy.det() - expected).abs() / expected.abs().max(1e-300)
    }
}

/// Why a seed produced no equilibrium.
#[derive(Debug, Clone, Serialize)]
pub enum SeedFailure {
    NonConvergence { seed: [f64; 2], final_defect: f64 },
    DegenerateSeed { seed: [f64; 2], det: f64 },
    Divergence { seed: [f64; 2] },
}

#[derive(Debug, Clone)]
pub struct FindReport {
    pub equilibria: Vec<Equilibrium>,
    pub failures: Vec<SeedFailure>,
}

// State for the combined integration: position, variational matrix columns,
// and the running integral of trace DF.
#[derive(Clone, Copy)]
struct AugState {
    u: PlanePoint,
    m: Mat2,
    tr: f64,
}

impl AugState {
    fn axpy(self, h: f64, d: AugState) -> AugState {
        AugState {
            u: self.u + d.u * h,
            m: self.m.add(d.m.scale(h)),
            tr: self.tr + h * d.tr,
        }
    }
}

fn rhs(spec: &VectorFieldSpec, t: f64, x: AugState) -> AugState {
    let df = spec.eval_df(t, x.u);
    AugState {
        u: spec.eval_f(t, x.u),
        m: df.mul_mat(x.m),
        tr: df.trace(),
    }
}

fn rk4_step(spec: &VectorFieldSpec, t: f64, h: f64, x: AugState) -> AugState {
    let k1 = rhs(spec, t, x);
    let k2 = rhs(spec, t + 0.5 * h, x.axpy(0.5 * h, k1));
    let k3 = rhs(spec, t + 0.5 * h, x.axpy(0.5 * h, k2));
    let k4 = rhs(spec, t + h, x.axpy(h, k3));
    AugState {
        u: x.u + (k1.u + (k2.u + k3.u) * 2.0 + k4.u) * (h / 6.0),
        m: x.m.add(
            k1.m.add(k2.m.scale(2.0)).add(k3.m.scale(2.0)).add(k4.m).scale(h / 6.0),
        ),
        tr: x.tr + (k1.tr + 2.0 * (k2.tr + k3.tr) + k4.tr) * (h / 6.0),
    }
}

struct PeriodMap {
    end: PlanePoint,
    monodromy: Mat2,
    trace_integral: f64,
    /// u at every integration node, including both endpoints.
    trajectory: Vec<PlanePoint>,
}

fn integrate(
    spec: &VectorFieldSpec,
    u0: PlanePoint,
    n_steps: usize,
    escape_radius: f64,
) -> Result<PeriodMap> {
    if n_steps < 32 {
        return Err(Error::InvalidParameter(format!(
            "n_steps must be >= 32, got {n_steps}"
        )));
    }
    let h = 1.0 / n_steps as f64;
    let mut x = AugState { u: u0, m: Mat2::IDENTITY, tr: 0.0 };
    let mut trajectory = Vec::with_capacity(n_steps + 1);
    trajectory.push(x.u);
    for step in 0..n_steps {
        let t = step as f64 * h;
        x = rk4_step(spec, t, h, x);
        if !x.u.is_finite() || x.u.norm() > escape_radius {
            return Err(Error::Divergence { t: t + h, radius: x.u.norm() });
        }
        trajectory.push(x.u);
    }
    Ok(PeriodMap { end: x.u, monodromy: x.m, trace_integral: x.tr, trajectory })
}

/// Integrate u_t = F(t, u) over one period with the variational equation.
/// Returns (u(1), monodromy).
pub fn integrate_period(
    spec: &VectorFieldSpec,
    u0: PlanePoint,
    n_steps: usize,
) -> Result<(PlanePoint, Mat2)> {
    let map = integrate(spec, u0, n_steps, DEFAULT_ESCAPE_RADIUS)?;
    Ok((map.end, map.monodromy))
}

/// Eigenvalues of the monodromy matrix by the closed-form 2x2 formula.
pub fn floquet(monodromy: Mat2) -> (Complex64, Complex64) {
    monodromy.eigenvalues()
}

fn loop_from_trajectory(map: &PeriodMap, time: &TimeGrid) -> Loop {
    // n_steps is chosen as a multiple of n_t so grid nodes land on
    // integration nodes exactly.
    let n_steps = map.trajectory.len() - 1;
    let stride = n_steps / time.len();
    let values = (0..time.len()).map(|j| map.trajectory[j * stride]).collect();
    Loop::new(*time, values).expect("trajectory values are finite")
}

fn orbit_residual(spec: &VectorFieldSpec, orbit: &Loop) -> f64 {
    let ut = orbit.d_t();
    orbit
        .values()
        .iter()
        .zip(ut.values().iter())
        .enumerate()
        .map(|(j, (&u, &ut))| (ut - spec.eval_f(orbit.time().node(j), u)).norm())
        .fold(0.0, f64::max)
}

/// Newton shooting on G(u0) = P(u0) - u0 from every seed; converged results
/// are de-duplicated at pairwise loop distance 10 * tol.
pub fn find_equilibria(
    spec: &VectorFieldSpec,
    seeds: &[PlanePoint],
    tol: f64,
    time: &TimeGrid,
    n_steps: usize,
) -> Result<FindReport> {
    if tol <= 0.0 {
        return Err(Error::InvalidParameter("tol must be positive".into()));
    }
    // Align integration nodes with the sampling grid.
    let n_steps = n_steps.max(32).next_multiple_of(time.len());
    let mut equilibria: Vec<Equilibrium> = Vec::new();
    let mut failures = Vec::new();

    'seed: for &seed in seeds {
        let mut u0 = seed;
        let mut defect = f64::INFINITY;
        let mut converged = false;
        for _ in 0..NEWTON_MAX_ITER {
            let map = match integrate(spec, u0, n_steps, DEFAULT_ESCAPE_RADIUS) {
                Ok(m) => m,
                Err(Error::Divergence { .. }) => {
                    failures.push(SeedFailure::Divergence { seed: [seed.p, seed.q] });
                    continue 'seed;
                }
                Err(e) => return Err(e),
            };
            let g = map.end - u0;
            defect = g.norm();
            if defect <= tol {
                converged = true;
                break;
            }
            let jac = map.monodromy.sub(Mat2::IDENTITY);
            match jac.solve(-g, SINGULAR_DET_TOL) {
                Some(step) => u0 = u0 + step,
                None => {
                    failures.push(SeedFailure::DegenerateSeed {
                        seed: [seed.p, seed.q],
                        det: jac.det(),
                    });
                    continue 'seed;
                }
            }
        }
        if !converged {
            failures.push(SeedFailure::NonConvergence {
                seed: [seed.p, seed.q],
                final_defect: defect,
            });
            continue;
        }
        let map = integrate(spec, u0, n_steps, DEFAULT_ESCAPE_RADIUS)?;
        let orbit = loop_from_trajectory(&map, time);
        let duplicate = equilibria
            .iter()
            .any(|eq| eq.orbit.sup_dist(&orbit).map(|d| d <= 10.0 * tol).unwrap_or(false));
        if duplicate {
            continue;
        }
        equilibria.push(Equilibrium {
            u0,
            residual: orbit_residual(spec, &orbit),
            monodromy: map.monodromy,
            floquet: floquet(map.monodromy),
            trace_integral: map.trace_integral,
            orbit,
        });
    }
    Ok(FindReport { equilibria, failures })
}

/// Default seed lattice: 8 x 8 over [-2, 2]^2, offset off the axes so seeds
/// avoid landing exactly on symmetric degeneracies.
pub fn default_seed_lattice() -> Vec<PlanePoint> {
    let mut seeds = Vec::with_capacity(64);
    for i in 0..8 {
        for j in 0..8 {
            seeds.push(PlanePoint::new(
                -2.0 + 4.0 * (i as f64 + 0.5) / 8.0,
                -2.0 + 4.0 * (j as f64 + 0.5) / 8.0,
            ));
        }
    }
    seeds
}
