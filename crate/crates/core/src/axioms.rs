//! Observable checks for the Lyapunov-function axioms on sampled data:
//! symmetry and local constancy of W, projection-equality pairs landing in
//! the singular set, isolation of crossings, and the drop law at crossings.

use crate::error::{Error, Result};
use crate::field::Field;
use crate::winding::{w_trace, WTrace};
use serde::Serialize;

#[derive(Debug, Clone, Serialize)]
pub struct AxiomCheck {
    pub name: String,
    pub description: String,
    pub pass: bool,
    pub violations: Vec<String>,
    /// Number of data points the check actually exercised.
    pub evidence_count: usize,
}

#[derive(Debug, Clone, Serialize)]
pub struct PairReport {
    pub pair: (usize, usize),
    pub valid_samples: usize,
    pub crossings: usize,
    pub w_values: Vec<i64>,
}

#[derive(Debug, Clone, Serialize)]
pub struct AxiomsReport {
    pub delta_valid: f64,
    pub t0: f64,
    pub checks: Vec<AxiomCheck>,
    pub pairs: Vec<PairReport>,
}

impl AxiomsReport {
    pub fn all_pass(&self) -> bool {
        self.checks.iter().all(|c| c.pass)
    }
}

fn check_symmetry(traces: &[(usize, usize, WTrace, WTrace)]) -> AxiomCheck {
    let mut violations = Vec::new();
    let mut count = 0;
    for (a, b, fwd, rev) in traces {
        for (i, (x, y)) in fwd.samples.iter().zip(rev.samples.iter()).enumerate() {
            count += 1;
            if x.w_value != y.w_value || x.valid != y.valid {
                violations.push(format!(
                    "pair ({a},{b}) sample {i}: W(u{a},u{b}) = {:?}, W(u{b},u{a}) = {:?}",
                    x.w_value, y.w_value
                ));
            }
        }
        if fwd.crossings.len() != rev.crossings.len() {
            violations.push(format!(
                "pair ({a},{b}): {} crossings forward vs {} reversed",
                fwd.crossings.len(),
                rev.crossings.len()
            ));
        }
    }
    AxiomCheck {
        name: "A1-symmetry".into(),
        description: "W(u1,u2) = W(u2,u1) on every valid sample".into(),
        pass: violations.is_empty(),
        violations,
        evidence_count: count,
    }
}

fn check_local_constancy(traces: &[(usize, usize, WTrace, WTrace)]) -> AxiomCheck {
    // Between consecutive crossings all valid samples carry one W value.
    let mut violations = Vec::new();
    let mut count = 0;
    for (a, b, fwd, _) in traces {
        let valid = fwd.valid_values();
        for win in valid.windows(2) {
            let (i, w_i) = win[0];
            let (j, w_j) = win[1];
            count += 1;
            if w_i == w_j {
                continue;
            }
            // A change must be explained by a crossing bracketed in between.
            let explained = fwd
                .crossings
                .iter()
                .any(|c| c.bracket.0 >= i && c.bracket.1 <= j);
            if !explained {
                violations.push(format!(
                    "pair ({a},{b}): W changes {w_i} -> {w_j} between samples {i} and {j} with no crossing"
                ));
            }
        }
    }
    AxiomCheck {
        name: "A1-local-constancy".into(),
        description: "W is constant between consecutive crossings".into(),
        pass: violations.is_empty(),
        violations,
        evidence_count: count,
    }
}

fn check_projection_in_sigma(
    fields: &[Field],
    traces: &[(usize, usize, WTrace, WTrace)],
    t0: f64,
) -> AxiomCheck {
    // Slices whose projections at t0 coincide (within delta) must be flagged
    // as members of the singular set, i.e. invalid samples.
    let mut violations = Vec::new();
    let mut count = 0;
    for (a, b, fwd, _) in traces {
        let u1 = &fields[*a];
        let u2 = &fields[*b];
        for (i, sample) in fwd.samples.iter().enumerate() {
            let p1 = u1.loop_at(i).interpolate(t0);
            let p2 = u2.loop_at(i).interpolate(t0);
            if (p1 - p2).norm() <= fwd.delta_valid {
                count += 1;
                if sample.valid {
                    violations.push(format!(
                        "pair ({a},{b}) sample {i}: projections agree at t0 = {t0} but the sample is not flagged singular"
                    ));
                }
            }
        }
    }
    AxiomCheck {
        name: "A3-projection".into(),
        description: "pairs with equal projection at t0 lie in the singular set".into(),
        pass: violations.is_empty(),
        violations,
        evidence_count: count,
    }
}

fn check_crossings_isolated(traces: &[(usize, usize, WTrace, WTrace)]) -> AxiomCheck {
    let mut violations = Vec::new();
    let mut count = 0;
    for (a, b, fwd, _) in traces {
        let mut sorted: Vec<_> = fwd.crossings.iter().collect();
        sorted.sort_by(|x, y| x.s_star.partial_cmp(&y.s_star).unwrap());
        for win in sorted.windows(2) {
            count += 1;
            let w0 = win[0];
            let w1 = win[1];
            // Brackets of distinct crossings must not overlap.
            if w1.bracket.0 < w0.bracket.1 {
                violations.push(format!(
                    "pair ({a},{b}): crossings at s = {:.6} and s = {:.6} share bracket samples",
                    w0.s_star, w1.s_star
                ));
            }
        }
        count += fwd.crossings.len();
    }
    AxiomCheck {
        name: "A4-isolation".into(),
        description: "crossing brackets are isolated".into(),
        pass: violations.is_empty(),
        violations,
        evidence_count: count,
    }
}

fn check_drop_law(traces: &[(usize, usize, WTrace, WTrace)]) -> AxiomCheck {
    let mut violations = Vec::new();
    let mut count = 0;
    for (a, b, fwd, _) in traces {
        for (k, c) in fwd.crossings.iter().enumerate() {
            if let Some(drop) = c.post_drop {
                count += 1;
                if drop < 1 {
                    violations.push(format!(
                        "pair ({a},{b}) crossing {k} at s = {:.6}: W drops by {drop}",
                        c.s_star
                    ));
                }
            }
        }
    }
    AxiomCheck {
        name: "A5-drop".into(),
        description: "every valid-flanked crossing drops W by at least 1".into(),
        pass: violations.is_empty(),
        violations,
        evidence_count: count,
    }
}

fn check_monotone(traces: &[(usize, usize, WTrace, WTrace)]) -> AxiomCheck {
    let mut violations = Vec::new();
    let mut count = 0;
    for (a, b, fwd, _) in traces {
        count += fwd.valid_values().len();
        for (i, j) in fwd.monotonicity_violations() {
            violations.push(format!(
                "pair ({a},{b}): W increases between samples {i} and {j}"
            ));
        }
    }
    AxiomCheck {
        name: "W-monotone".into(),
        description: "valid W samples are non-increasing in s".into(),
        pass: violations.is_empty(),
        violations,
        evidence_count: count,
    }
}

/// Run the axiom checks over the requested index pairs of a shared-grid
/// family of fields. Violations are enumerated in the report, not fatal.
pub fn axioms_report(
    fields: &[Field],
    pairs: &[(usize, usize)],
    delta_valid: f64,
    t0: f64,
) -> Result<AxiomsReport> {
    if fields.is_empty() || pairs.is_empty() {
        return Err(Error::InvalidParameter("need at least one field pair".into()));
    }
    let grid = fields[0].grid();
    for (k, f) in fields.iter().enumerate() {
        if f.grid() != grid {
            return Err(Error::GridMismatch(format!("field {k} is on a different grid")));
        }
    }
    let mut traces = Vec::new();
    let mut pair_reports = Vec::new();
    for &(a, b) in pairs {
        if a >= fields.len() || b >= fields.len() {
            return Err(Error::InvalidParameter(format!("pair ({a},{b}) out of range")));
        }
        let fwd = w_trace(&fields[a], &fields[b], delta_valid)?;
        let rev = w_trace(&fields[b], &fields[a], delta_valid)?;
        pair_reports.push(PairReport {
            pair: (a, b),
            valid_samples: fwd.samples.iter().filter(|s| s.valid).count(),
            crossings: fwd.crossings.len(),
            w_values: {
                let mut ws: Vec<i64> =
                    fwd.valid_values().iter().map(|&(_, w)| w).collect();
                ws.dedup();
                ws
            },
        });
        traces.push((a, b, fwd, rev));
    }
    let checks = vec![
        check_symmetry(&traces),
        check_local_constancy(&traces),
        check_projection_in_sigma(fields, &traces, t0),
        check_crossings_isolated(&traces),
        check_drop_law(&traces),
        check_monotone(&traces),
    ];
    Ok(AxiomsReport { delta_valid, t0, checks, pairs: pair_reports })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::{CylinderGrid, TimeGrid};
    use crate::plane::PlanePoint;
    use std::f64::consts::PI;

    fn crossing_pair() -> Vec<Field> {
        let grid = CylinderGrid::new(-0.5, 0.5, 201, TimeGrid::new(64).unwrap()).unwrap();
        vec![
            Field::constant(grid, PlanePoint::new(0.5, 0.0)),
            Field::from_fn(grid, |s, t| {
                let r = (-2.0 * PI * s).exp();
                PlanePoint::new(r * (2.0 * PI * t).cos(), r * (2.0 * PI * t).sin())
            }),
        ]
    }

    #[test]
    fn analytic_pair_passes_all_axioms() {
        let fields = crossing_pair();
        let report = axioms_report(&fields, &[(0, 1)], 1e-3, 0.0).unwrap();
        assert!(report.all_pass(), "{:#?}", report.checks);
        let drop = report.checks.iter().find(|c| c.name == "A5-drop").unwrap();
        assert_eq!(drop.evidence_count, 1);
        assert_eq!(report.pairs[0].w_values, vec![1, 0]);
    }

    #[test]
    fn disjoint_constant_pair_passes() {
        let grid = CylinderGrid::new(0.0, 2.0, 21, TimeGrid::new(8).unwrap()).unwrap();
        let fields = vec![
            Field::constant(grid, PlanePoint::new(0.0, 0.0)),
            Field::constant(grid, PlanePoint::new(2.0, 1.0)),
        ];
        let report = axioms_report(&fields, &[(0, 1)], 1e-4, 0.25).unwrap();
        assert!(report.all_pass());
        assert_eq!(report.pairs[0].w_values, vec![0]);
        assert_eq!(report.pairs[0].crossings, 0);
    }

    #[test]
    fn grid_mismatch_is_rejected() {
        let g1 = CylinderGrid::new(0.0, 1.0, 5, TimeGrid::new(8).unwrap()).unwrap();
        let g2 = CylinderGrid::new(0.0, 1.0, 7, TimeGrid::new(8).unwrap()).unwrap();
        let fields = vec![
            Field::constant(g1, PlanePoint::ZERO),
            Field::constant(g2, PlanePoint::new(1.0, 0.0)),
        ];
        assert!(axioms_report(&fields, &[(0, 1)], 1e-4, 0.0).is_err());
    }
}
