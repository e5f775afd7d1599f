//! Acceptance suite: every criterion runs at its stated tolerance and prints
//! one pass line; a failed assertion marks the criterion failed.
//!
//! Solver-based criteria drive the shipped binary with the checked-in
//! configs; analytics run on the library directly.

use crlab_core::equilibria::{find_equilibria, Equilibrium};
use crlab_core::field::{Field, Loop};
use crlab_core::generate;
use crlab_core::grid::{CylinderGrid, TimeGrid};
use crlab_core::limitset::{classify_omega, projection_injectivity, ClassifyConfig, Verdict};
use crlab_core::ops::cz_identity_ratio;
use crlab_core::plane::PlanePoint;
use crlab_core::solver::{newton_solve, BoundaryCondition, SolverConfig};
use crlab_core::vectorfield::{hamilton_action, HamiltonianKind, VectorFieldSpec};
use crlab_core::winding::{w_trace, winding_number, winding_number_quadrature};
use std::f64::consts::PI;
use std::path::{Path, PathBuf};
use std::sync::OnceLock;
use std::time::Instant;

fn grid(s_min: f64, s_max: f64, n_s: usize, n_t: usize) -> CylinderGrid {
    CylinderGrid::new(s_min, s_max, n_s, TimeGrid::new(n_t).unwrap()).unwrap()
}

fn configs_dir() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs")
}

fn run_binary(args: &[&str]) -> i32 {
    std::process::Command::new(env!("CARGO_BIN_EXE_crlab"))
        .args(args)
        .status()
        .expect("binary runs")
        .code()
        .expect("exit code")
}

struct Shared {
    hopf_solution: Field,
    hopf_period: f64,
    hopf_tiled: Field,
    pend_het: Field,
    pend_residual: f64,
    pend_converged: bool,
    pend_mirror: Field,
    pend_eqs: Vec<Equilibrium>,
}

static SHARED: OnceLock<Shared> = OnceLock::new();

fn shared() -> &'static Shared {
    SHARED.get_or_init(|| {
        let out_root = std::env::temp_dir().join(format!("crlab_acceptance_{}", std::process::id()));
        let hopf_out = out_root.join("hopf");
        let pend_out = out_root.join("pendulum");
        std::fs::create_dir_all(&hopf_out).unwrap();
        std::fs::create_dir_all(&pend_out).unwrap();

        // Periodic-orbit pipeline through the binary.
        let hopf_cfg = configs_dir().join("hopf_orbit.toml");
        let code = run_binary(&[
            "solve",
            "--config",
            hopf_cfg.to_str().unwrap(),
            "--out",
            hopf_out.to_str().unwrap(),
        ]);
        assert_eq!(code, 0, "periodic-orbit solve must converge");
        let hopf_solution = crlab_core::io::read_field_binary(&hopf_out.join("solution.crpb")).unwrap();
        let manifest: serde_json::Value = serde_json::from_str(
            &std::fs::read_to_string(hopf_out.join("solve_manifest.json")).unwrap(),
        )
        .unwrap();
        let hopf_period = manifest["results"]["period"].as_f64().unwrap();
        let hopf_tiled = hopf_solution.tile_periodic(8).unwrap();

        // Connecting-orbit pipeline through the binary.
        let pend_cfg = configs_dir().join("pendulum_heteroclinic.toml");
        let code = run_binary(&[
            "solve",
            "--config",
            pend_cfg.to_str().unwrap(),
            "--out",
            pend_out.to_str().unwrap(),
        ]);
        assert_eq!(code, 0, "connecting-orbit solve must converge");
        let pend_het = crlab_core::io::read_field_binary(&pend_out.join("solution.crpb")).unwrap();
        let manifest: serde_json::Value = serde_json::from_str(
            &std::fs::read_to_string(pend_out.join("solve_manifest.json")).unwrap(),
        )
        .unwrap();
        let pend_residual = manifest["results"]["residual_sup"].as_f64().unwrap();
        let pend_converged = manifest["results"]["converged"].as_bool().unwrap();

        // Mirrored partner (centre to the saddle at -1/2) through the library.
        let g = *pend_het.grid();
        let spec = VectorFieldSpec::Hamiltonian(HamiltonianKind::Pendulum);
        let left = Loop::constant(g.time, PlanePoint::new(0.0, 0.0));
        let right = Loop::constant(g.time, PlanePoint::new(-0.5, 0.0));
        let initial = Field::from_fn(g, |s, _| {
            let lam = 0.5 * ((s / 2.0).tanh() + 1.0);
            PlanePoint::new(-0.5 * lam, 0.0)
        });
        let cfg = SolverConfig {
            tol: 1e-8,
            max_iter: 100,
            bc_slack: 1e-3,
            damping_floor: 2f64.powi(-40),
            ..SolverConfig::default()
        };
        let mirror =
            newton_solve(&spec, &initial, &BoundaryCondition::FixedLoops { left, right }, &cfg)
                .unwrap();
        assert!(mirror.converged, "mirrored connecting orbit must converge");

        let eqs = find_equilibria(
            &spec,
            &[PlanePoint::new(0.1, 0.05), PlanePoint::new(0.4, -0.05)],
            1e-12,
            &g.time,
            512,
        )
        .unwrap()
        .equilibria;

        Shared {
            hopf_solution,
            hopf_period,
            hopf_tiled,
            pend_het,
            pend_residual,
            pend_converged,
            pend_mirror: mirror.field,
            pend_eqs: eqs,
        }
    })
}

/// Rotate an s-periodic tiling by `lines` grid lines: the s-shifted orbit.
fn rotate_tiled(field: &Field, lines: usize) -> Field {
    let grid = *field.grid();
    let period_lines = grid.n_s - 1;
    let mut values = Vec::with_capacity(field.values().len());
    for i in 0..grid.n_s {
        values.extend_from_slice(field.slice_at((i + lines) % period_lines));
    }
    Field::new(grid, values).unwrap()
}

fn constant_field_from_loop(grid: CylinderGrid, l: &Loop) -> Field {
    let mut values = Vec::with_capacity(grid.node_count());
    for _ in 0..grid.n_s {
        values.extend_from_slice(l.values());
    }
    Field::new(grid, values).unwrap()
}

#[test]
fn acceptance_1_winding_exactness() {
    let start = Instant::now();
    let time = TimeGrid::new(64).unwrap();
    for k in -3..=3i64 {
        let w = Loop::from_fn(time, |t| {
            let th = 2.0 * PI * k as f64 * t;
            PlanePoint::new(th.cos(), th.sin())
        });
        assert_eq!(winding_number(&w, 1e-12).unwrap(), k, "circle loop k = {k}");
        let quad = winding_number_quadrature(&w, 1e-12).unwrap();
        assert!(
            (quad - k as f64).abs() <= 1e-6,
            "one-form quadrature for k = {k}: {quad}"
        );
    }
    let elapsed = start.elapsed();
    assert!(elapsed.as_secs_f64() < 1.0, "runtime {elapsed:?}");
    println!("acceptance 1 (winding exactness): PASS in {elapsed:.2?}");
}

#[test]
fn acceptance_2_cz_identity() {
    let start = Instant::now();
    let g = grid(-1.0, 1.0, 400, 64);
    let bump = Field::from_fn(g, |s, t| {
        let x = s / 0.8;
        let eta = if x.abs() >= 1.0 { 0.0 } else { (-1.0 / (1.0 - x * x)).exp() };
        PlanePoint::new(eta * (2.0 * PI * t).cos(), eta * (2.0 * PI * t).sin())
    });
    let ratio = cz_identity_ratio(&bump).unwrap();
    assert!((ratio - 1.0).abs() <= 1e-5, "bump ratio {ratio}");

    let random = generate::random_bump(g, 0x5EED);
    let ratio_r = cz_identity_ratio(&random).unwrap();
    assert!((ratio_r - 1.0).abs() <= 1e-5, "band-limited ratio {ratio_r}");
    let elapsed = start.elapsed();
    assert!(elapsed.as_secs_f64() < 1.0, "runtime {elapsed:?}");
    println!("acceptance 2 (gradient/dbar L2 identity): PASS in {elapsed:.2?}");
}

fn holo_mode(s: f64, t: f64) -> PlanePoint {
    let r = (-2.0 * PI * s).exp();
    PlanePoint::new(r * (2.0 * PI * t).cos(), r * (2.0 * PI * t).sin())
}

fn solve_mode(n_s: usize) -> f64 {
    let g = grid(0.0, 1.0, n_s, 64);
    let left = Loop::from_fn(g.time, |t| holo_mode(0.0, t));
    let right = Loop::from_fn(g.time, |t| holo_mode(1.0, t));
    let initial =
        Field::from_fn(g, |s, t| holo_mode(0.0, t) * (1.0 - s) + holo_mode(1.0, t) * s);
    let report = newton_solve(
        &VectorFieldSpec::Zero,
        &initial,
        &BoundaryCondition::FixedLoops { left, right },
        &SolverConfig::default(),
    )
    .unwrap();
    assert!(report.converged, "mode solve at n_s = {n_s}");
    report.field.sup_dist(&Field::from_fn(g, holo_mode)).unwrap()
}

#[test]
fn acceptance_3_analytic_reproduction() {
    let start = Instant::now();
    let err = solve_mode(201);
    assert!(err <= 1e-4, "sup error {err}");
    let err_half = solve_mode(401);
    let ratio = err / err_half;
    assert!((3.2..=4.8).contains(&ratio), "halving ratio {ratio}");
    let elapsed = start.elapsed();
    assert!(elapsed.as_secs_f64() < 30.0, "runtime {elapsed:?}");
    println!(
        "acceptance 3 (analytic reproduction, err {err:.2e}, ratio {ratio:.2}): PASS in {elapsed:.2?}"
    );
}

#[test]
fn acceptance_4_w_drop_at_crossing() {
    let start = Instant::now();
    let g = grid(-0.5, 0.5, 201, 64);
    let (a, b) = generate::crossing_pair(g);
    let trace = w_trace(&a, &b, 1e-3).unwrap();
    let s_star = 2f64.ln() / (2.0 * PI);
    let ds = g.ds();

    assert_eq!(trace.crossings.len(), 1, "exactly one crossing");
    let ev = &trace.crossings[0];
    assert!((ev.s_star - s_star).abs() <= 2.0 * ds, "refined s* = {}", ev.s_star);
    let lo = g.s_node(ev.bracket.0);
    let hi = g.s_node(ev.bracket.1);
    assert!(
        lo - 2.0 * ds <= s_star && s_star <= hi + 2.0 * ds,
        "bracket [{lo}, {hi}] misses s* = {s_star}"
    );
    for sample in &trace.samples {
        if let Some(w) = sample.w_value {
            assert_eq!(w, if sample.s < ev.s_star { 1 } else { 0 }, "s = {}", sample.s);
        }
    }
    assert_eq!(ev.post_drop, Some(1));
    let elapsed = start.elapsed();
    assert!(elapsed.as_secs_f64() < 1.0, "runtime {elapsed:?}");
    println!("acceptance 4 (winding drop at the crossing): PASS in {elapsed:.2?}");
}

/// Every computed pair in the suite, as (fields, delta) groups per grid.
fn suite_pairs(sh: &Shared) -> Vec<(Field, Field, f64)> {
    let g = grid(-0.5, 0.5, 201, 64);
    let (a, b) = generate::crossing_pair(g);
    let eq_field =
        constant_field_from_loop(*sh.pend_het.grid(), &sh.pend_eqs[0].orbit);
    let shift_lines = (sh.hopf_tiled.grid().n_s - 1) / 16;
    vec![
        (a, b, 1e-3),
        (sh.pend_het.clone(), sh.pend_mirror.clone(), 1e-4),
        (sh.pend_het.clone(), eq_field, 1e-4),
        (sh.hopf_tiled.clone(), rotate_tiled(&sh.hopf_tiled, shift_lines), 1e-4),
    ]
}

#[test]
fn acceptance_5_monotonicity() {
    let sh = shared();
    let start = Instant::now();
    let mut samples = 0;
    for (k, (u1, u2, delta)) in suite_pairs(sh).into_iter().enumerate() {
        let trace = w_trace(&u1, &u2, delta).unwrap();
        let violations = trace.monotonicity_violations();
        assert!(violations.is_empty(), "pair {k} violates monotonicity: {violations:?}");
        samples += trace.samples.iter().filter(|s| s.valid).count();
    }
    let elapsed = start.elapsed();
    println!(
        "acceptance 5 (monotone winding traces, {samples} valid samples): PASS in {elapsed:.2?}"
    );
}

#[test]
fn acceptance_6_dichotomy_periodic_orbit() {
    let sh = shared();
    let start = Instant::now();
    for v in sh.hopf_solution.values() {
        assert!((v.norm() - 1.0).abs() <= 1e-3, "radius {}", v.norm());
    }
    assert!((sh.hopf_period - 2.0 * PI).abs() <= 1e-2, "period {}", sh.hopf_period);

    let report = classify_omega(&sh.hopf_tiled, &[], &ClassifyConfig::default(), None);
    match &report.verdict {
        Verdict::PeriodicOrbit { period } => {
            assert!((period - 2.0 * PI).abs() <= 1e-2, "classified period {period}");
        }
        other => panic!("expected a periodic orbit, got {other:?}"),
    }
    let elapsed = start.elapsed();
    assert!(elapsed.as_secs_f64() < 120.0, "runtime {elapsed:?}");
    println!(
        "acceptance 6 (dichotomy: one s-periodic orbit, period {:.5}): PASS in {elapsed:.2?}",
        sh.hopf_period
    );
}

#[test]
fn acceptance_7_dichotomy_equilibria_chain() {
    let sh = shared();
    let start = Instant::now();
    assert!(sh.pend_converged, "connecting-orbit solve converged");
    assert!(sh.pend_residual <= 1e-8, "residual {}", sh.pend_residual);

    let spec = VectorFieldSpec::Hamiltonian(HamiltonianKind::Pendulum);
    let report = classify_omega(
        &sh.pend_het,
        &sh.pend_eqs,
        &ClassifyConfig::default(),
        Some(&spec),
    );
    match &report.verdict {
        Verdict::EquilibriaChain { matches } => {
            assert_eq!(matches.len(), 2, "both terminal equilibria matched");
            for m in matches {
                assert!(m.distance <= 1e-3, "match distance {}", m.distance);
            }
        }
        other => panic!("expected an equilibria chain, got {other:?}"),
    }

    // Hamilton action of the s-slices is non-increasing.
    let mut prev = f64::INFINITY;
    for i in 0..sh.pend_het.grid().n_s {
        let a = hamilton_action(&spec, &sh.pend_het.loop_at(i)).unwrap();
        assert!(a <= prev + 1e-8, "action rises at line {i}");
        prev = a;
    }
    let elapsed = start.elapsed();
    assert!(elapsed.as_secs_f64() < 300.0, "runtime {elapsed:?}");
    println!(
        "acceptance 7 (dichotomy: equilibria chain, residual {:.2e}): PASS in {elapsed:.2?}",
        sh.pend_residual
    );
}

#[test]
fn acceptance_8_projection_injectivity() {
    let sh = shared();
    let start = Instant::now();
    let report = classify_omega(&sh.hopf_tiled, &[], &ClassifyConfig::default(), None);
    let expected = 2.0 * (PI / 64.0).sin();
    for t0 in [0.0, 0.37] {
        let proj = projection_injectivity(&report, t0, 64).unwrap();
        assert!(proj.injective, "injective at t0 = {t0}");
        assert_eq!(proj.points.len(), 64);
        let got = proj.min_pairwise_distance.unwrap();
        assert!(
            (got - expected).abs() <= 0.1 * expected,
            "min pairwise distance {got} vs {expected} at t0 = {t0}"
        );
    }
    let elapsed = start.elapsed();
    assert!(elapsed.as_secs_f64() < 10.0, "runtime {elapsed:?}");
    println!("acceptance 8 (projection injectivity at two t0): PASS in {elapsed:.2?}");
}

#[test]
fn acceptance_9_axioms_harness() {
    let sh = shared();
    let start = Instant::now();
    let mut checked = 0;
    for (k, (u1, u2, delta)) in suite_pairs(sh).into_iter().enumerate() {
        let report =
            crlab_core::axioms::axioms_report(&[u1, u2], &[(0, 1)], delta, 0.0).unwrap();
        assert!(report.all_pass(), "pair {k} violates the axioms: {:#?}", report.checks);
        checked += report.checks.len();
    }

    // Distinct shifts of the periodic orbit carry one constant winding value.
    let period_lines = sh.hopf_tiled.grid().n_s - 1;
    for lines in [period_lines / 16, period_lines / 5, period_lines / 3] {
        let shifted = rotate_tiled(&sh.hopf_tiled, lines);
        let trace = w_trace(&sh.hopf_tiled, &shifted, 1e-4).unwrap();
        let mut values: Vec<i64> =
            trace.samples.iter().filter_map(|s| s.w_value).collect();
        values.dedup();
        assert_eq!(values, vec![0], "W constant across orbit shifts ({lines} lines)");
    }
    let elapsed = start.elapsed();
    println!("acceptance 9 (axioms harness, {checked} checks): PASS in {elapsed:.2?}");
}

#[test]
fn acceptance_10_equilibria() {
    let start = Instant::now();
    let spec = VectorFieldSpec::Hamiltonian(HamiltonianKind::Pendulum);
    let time = TimeGrid::new(64).unwrap();
    let report = find_equilibria(
        &spec,
        &[PlanePoint::new(0.1, 0.05), PlanePoint::new(0.4, -0.05)],
        1e-12,
        &time,
        512,
    )
    .unwrap();
    assert_eq!(report.equilibria.len(), 2, "exactly two constant equilibria");
    let mut u0s: Vec<PlanePoint> = report.equilibria.iter().map(|e| e.u0).collect();
    u0s.sort_by(|a, b| a.p.partial_cmp(&b.p).unwrap());
    assert!((u0s[0] - PlanePoint::new(0.0, 0.0)).norm() < 1e-9);
    assert!((u0s[1] - PlanePoint::new(0.5, 0.0)).norm() < 1e-9);
    for eq in &report.equilibria {
        assert!(eq.residual <= 1e-10, "orbit residual {}", eq.residual);
        assert!(eq.liouville_defect() <= 1e-6, "Liouville defect {}", eq.liouville_defect());
    }
    let elapsed = start.elapsed();
    assert!(elapsed.as_secs_f64() < 5.0, "runtime {elapsed:?}");
    println!("acceptance 10 (equilibria at the critical points): PASS in {elapsed:.2?}");
}
