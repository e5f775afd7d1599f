//! The translation flow on computed fields: s-shifts, plane projections,
//! tail-window classification of limit behaviour (periodic orbit versus a
//! chain of equilibria), and the projection-injectivity report.

use crate::error::{Error, Result};
use crate::equilibria::Equilibrium;
use crate::field::{Field, Loop};
use crate::ops::d_s;
use crate::plane::PlanePoint;
use crate::vectorfield::VectorFieldSpec;
use serde::Serialize;

/// The slice u(sigma, .) with linear interpolation between adjacent s-lines.
pub fn shift(u: &Field, sigma: f64) -> Result<Loop> {
    let grid = u.grid();
    if sigma < grid.s_min - 1e-12 || sigma > grid.s_max + 1e-12 {
        return Err(Error::OutOfWindow { sigma, s_min: grid.s_min, s_max: grid.s_max });
    }
    let x = ((sigma - grid.s_min) / grid.ds()).clamp(0.0, (grid.n_s - 1) as f64);
    let i0 = (x.floor() as usize).min(grid.n_s - 2);
    let frac = x - i0 as f64;
    let a = u.slice_at(i0);
    let b = u.slice_at(i0 + 1);
    let values = a
        .iter()
        .zip(b.iter())
        .map(|(&va, &vb)| va * (1.0 - frac) + vb * frac)
        .collect();
    Loop::new(grid.time, values)
}

/// Evaluate the shifted slice at the cylinder point (sigma, t0).
pub fn project(u: &Field, sigma: f64, t0: f64) -> Result<PlanePoint> {
    Ok(shift(u, sigma)?.interpolate(t0))
}

#[derive(Debug, Clone, Serialize)]
pub struct EquilibriumMatch {
    /// Which end of the window matched ("alpha" = s_min, "omega" = s_max).
    pub end: String,
    pub eq_index: usize,
    pub u0: [f64; 2],
    pub distance: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct Evidence {
    /// Smallest mean slice distance over candidate recurrence lags.
    pub recurrence_score: Option<f64>,
    /// Sup of the slice trajectory diameter over the tail window.
    pub tail_diameter: f64,
    /// Distance of each window end to its closest equilibrium.
    pub end_distances: Option<(f64, f64)>,
    /// Sup of |u_s| on the first and last line (how stationary the ends are).
    pub end_speeds: (f64, f64),
    /// Sup of the cylinder-equation residual on the end lines, when the
    /// vector field is known.
    pub end_residuals: Option<(f64, f64)>,
}

#[derive(Debug, Clone, Serialize)]
pub enum Verdict {
    PeriodicOrbit { period: f64 },
    EquilibriaChain { matches: Vec<EquilibriumMatch> },
    Undetermined { reason: String },
}

#[derive(Debug, Clone)]
pub struct LimitSetReport {
    pub verdict: Verdict,
    pub evidence: Evidence,
    /// One-period window of the orbit for periodic verdicts.
    pub representative: Option<Field>,
}

#[derive(Debug, Clone)]
pub struct ClassifyConfig {
    /// Fraction of the window (from the right) used as the tail.
    pub tail_fraction: f64,
    /// Mean slice distance below which a lag counts as recurrent.
    pub recurrence_tol: f64,
    /// Loop sup-distance below which an end matches an equilibrium.
    pub eq_match_tol: f64,
    /// Smallest admissible period, in grid steps.
    pub min_period_steps: usize,
}

impl Default for ClassifyConfig {
    fn default() -> Self {
        ClassifyConfig {
            tail_fraction: 0.25,
            recurrence_tol: 1e-4,
            eq_match_tol: 1e-3,
            min_period_steps: 4,
        }
    }
}

fn slice_dist(u: &Field, i: usize, j: usize) -> f64 {
    u.slice_at(i)
        .iter()
        .zip(u.slice_at(j).iter())
        .map(|(&a, &b)| (a - b).norm())
        .fold(0.0, f64::max)
}

fn closest_equilibrium(slice: &Loop, eqs: &[Equilibrium]) -> Option<(usize, f64)> {
    eqs.iter()
        .enumerate()
        .filter_map(|(k, eq)| slice.sup_dist(&eq.orbit).ok().map(|d| (k, d)))
        .min_by(|a, b| a.1.partial_cmp(&b.1).unwrap())
}

/// Classify the tail behaviour of a computed solution window.
///
/// Both window ends matching known equilibria gives an equilibria chain; a
/// sharp recurrence minimum in the tail gives a periodic orbit with the
/// period refined by parabolic interpolation of the lag scores; anything
/// else is undetermined, with diagnostics.
pub fn classify_omega(
    u: &Field,
    eqs: &[Equilibrium],
    cfg: &ClassifyConfig,
    spec: Option<&VectorFieldSpec>,
) -> LimitSetReport {
    let grid = u.grid();
    let n_s = grid.n_s;
    let ds = grid.ds();

    let end_speeds = {
        let us = d_s(u);
        let speed = |i: usize| us.slice_at(i).iter().map(|v| v.norm()).fold(0.0, f64::max);
        (speed(0), speed(n_s - 1))
    };
    let end_residuals = spec.map(|sp| {
        let r = crate::solver::cr_residual(sp, u);
        let line = |i: usize| r.slice_at(i).iter().map(|v| v.norm()).fold(0.0, f64::max);
        (line(0), line(n_s - 1))
    });

    // Chain test: both window ends settle onto known equilibria.
    let left = u.loop_at(0);
    let right = u.loop_at(n_s - 1);
    let left_match = closest_equilibrium(&left, eqs);
    let right_match = closest_equilibrium(&right, eqs);
    let end_distances = match (&left_match, &right_match) {
        (Some((_, dl)), Some((_, dr))) => Some((*dl, *dr)),
        _ => None,
    };

    // Tail window for recurrence analysis.
    let tail_len = ((n_s as f64 * cfg.tail_fraction) as usize).max(3).min(n_s);
    let tail_start = n_s - tail_len;
    let mut tail_diameter = 0.0f64;
    for i in tail_start..n_s {
        tail_diameter = tail_diameter.max(slice_dist(u, tail_start, i));
    }

    if let (Some((kl, dl)), Some((kr, dr))) = (left_match, right_match) {
        if dl <= cfg.eq_match_tol && dr <= cfg.eq_match_tol {
            let mut matches = vec![EquilibriumMatch {
                end: "alpha".into(),
                eq_index: kl,
                u0: [eqs[kl].u0.p, eqs[kl].u0.q],
                distance: dl,
            }];
            if kr != kl {
                matches.push(EquilibriumMatch {
                    end: "omega".into(),
                    eq_index: kr,
                    u0: [eqs[kr].u0.p, eqs[kr].u0.q],
                    distance: dr,
                });
            } else {
                matches[0].end = "both".into();
                matches[0].distance = dl.max(dr);
            }
            return LimitSetReport {
                verdict: Verdict::EquilibriaChain { matches },
                evidence: Evidence {
                    recurrence_score: None,
                    tail_diameter,
                    end_distances,
                    end_speeds,
                    end_residuals,
                },
                representative: None,
            };
        }
    }

    // Recurrence test on the tail window. Lags run past the half window so a
    // period of up to ~2/3 of the tail still lands strictly inside the range.
    let max_lag = 2 * tail_len / 3;
    if tail_diameter < 10.0 * cfg.recurrence_tol || max_lag <= cfg.min_period_steps {
        return LimitSetReport {
            verdict: Verdict::Undetermined {
                reason: if tail_diameter < 10.0 * cfg.recurrence_tol {
                    "tail is stationary but the ends match no known equilibrium".into()
                } else {
                    "window too short for recurrence analysis".into()
                },
            },
            evidence: Evidence {
                recurrence_score: None,
                tail_diameter,
                end_distances,
                end_speeds,
                end_residuals,
            },
            representative: None,
        };
    }

    let score = |lag: usize| -> f64 {
        let mut acc = 0.0;
        let mut count = 0;
        for i in tail_start..(n_s - lag) {
            acc += slice_dist(u, i, i + lag);
            count += 1;
        }
        acc / count.max(1) as f64
    };
    let scores: Vec<f64> = (0..=max_lag).map(score).collect();
    let (best_lag, best_score) = scores
        .iter()
        .enumerate()
        .skip(cfg.min_period_steps)
        .map(|(l, &v)| (l, v))
        .min_by(|a, b| a.1.partial_cmp(&b.1).unwrap())
        .unwrap();

    if best_score <= cfg.recurrence_tol && best_lag < max_lag {
        // Parabolic sub-lag refinement around the minimum.
        let (ym, y0, yp) = (scores[best_lag - 1], scores[best_lag], scores[best_lag + 1]);
        let denom = ym - 2.0 * y0 + yp;
        let offset = if denom.abs() > 1e-300 {
            (0.5 * (ym - yp) / denom).clamp(-0.5, 0.5)
        } else {
            0.0
        };
        let period = (best_lag as f64 + offset) * ds;
        let representative = {
            let start = tail_start;
            let end = (start + best_lag).min(n_s - 1);
            let mut values = Vec::new();
            for i in start..=end {
                values.extend_from_slice(u.slice_at(i));
            }
            crate::grid::CylinderGrid::new(
                grid.s_node(start),
                grid.s_node(end),
                end - start + 1,
                grid.time,
            )
            .and_then(|g| Field::new(g, values))
            .ok()
        };
        return LimitSetReport {
            verdict: Verdict::PeriodicOrbit { period },
            evidence: Evidence {
                recurrence_score: Some(best_score),
                tail_diameter,
                end_distances,
                end_speeds,
                end_residuals,
            },
            representative,
        };
    }

    LimitSetReport {
        verdict: Verdict::Undetermined {
            reason: format!(
                "no recurrence at tolerance {:.1e} (best lag {} scores {:.3e}) and ends match no equilibrium",
                cfg.recurrence_tol, best_lag, best_score
            ),
        },
        evidence: Evidence {
            recurrence_score: Some(best_score),
            tail_diameter,
            end_distances,
            end_speeds,
            end_residuals,
        },
        representative: None,
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct ProjectionReport {
    pub t0: f64,
    pub points: Vec<[f64; 2]>,
    /// None when fewer than two admissible pairs exist.
    pub min_pairwise_distance: Option<f64>,
    pub injective: bool,
    /// Distance threshold tied to the interpolation resolution.
    pub delta_inj: f64,
}

/// Sample shifts across one period of a periodic-orbit verdict, project them
/// at t0, and report the minimum pairwise plane distance over pairs whose
/// orbit-time separation exceeds the interpolation resolution.
pub fn projection_injectivity(
    report: &LimitSetReport,
    t0: f64,
    n_samples: usize,
) -> Result<ProjectionReport> {
    let (period, orbit) = match (&report.verdict, &report.representative) {
        (Verdict::PeriodicOrbit { period }, Some(rep)) => (*period, rep),
        _ => {
            return Err(Error::Precondition(
                "projection injectivity needs a periodic-orbit verdict".into(),
            ))
        }
    };
    if n_samples == 0 {
        return Err(Error::InvalidParameter("n_samples must be >= 1".into()));
    }
    let grid = orbit.grid();
    let ds = grid.ds();
    // Interpolation-resolution threshold: two samples closer than 2 ds in
    // orbit time are not resolved, and distances below the corresponding
    // value jump cannot certify injectivity.
    let sup_step = {
        let mut m = 0.0f64;
        for i in 0..grid.n_s - 1 {
            m = m.max(slice_dist(orbit, i, i + 1));
        }
        m
    };
    let delta_inj = 2.0 * sup_step;
    let time_resolution = 2.0 * ds;

    let mut sigmas = Vec::with_capacity(n_samples);
    let mut points = Vec::with_capacity(n_samples);
    for j in 0..n_samples {
        let sigma = grid.s_min + period * j as f64 / n_samples as f64;
        let sigma = sigma.min(grid.s_max);
        sigmas.push(sigma - grid.s_min);
        points.push(project(orbit, sigma, t0)?);
    }

    let mut min_dist: Option<f64> = None;
    for a in 0..points.len() {
        for b in (a + 1)..points.len() {
            let dt_orbit = (sigmas[a] - sigmas[b]).abs();
            let circ = dt_orbit.min(period - dt_orbit);
            if circ <= time_resolution {
                continue;
            }
            let d = (points[a] - points[b]).norm();
            min_dist = Some(min_dist.map_or(d, |m: f64| m.min(d)));
        }
    }
    let injective = match min_dist {
        Some(d) => d > delta_inj,
        None => true,
    };
    Ok(ProjectionReport {
        t0,
        points: points.iter().map(|p| [p.p, p.q]).collect(),
        min_pairwise_distance: min_dist,
        injective,
        delta_inj,
    })
}
