//! Batch commands: each one is a deterministic pipeline from a declarative
//! config (plus input artifacts) to output artifacts with a manifest.

use crate::config::{GenerateBlock, RunConfig};
use crate::manifest::{config_hash, write_manifest, Manifest};
use anyhow::{bail, Context, Result};
use crlab_core::equilibria::{find_equilibria, Equilibrium};
use crlab_core::field::{Field, Loop};
use crlab_core::generate;
use crlab_core::io;
use crlab_core::limitset::{classify_omega, project, projection_injectivity, Verdict};
use crlab_core::plane::PlanePoint;
use crlab_core::solver::{newton_solve, BoundaryCondition};
use crlab_core::winding::{default_delta_valid, is_diagonal_pair, w_trace};
use serde::Serialize;
use serde_json::json;
use std::path::{Path, PathBuf};

/// Exit codes shared by all commands.
pub mod exit_code {
    pub const OK: i32 = 0;
    pub const CONFIG: i32 = 2;
    pub const NO_EQUILIBRIA: i32 = 3;
    pub const SOLVER_FAILED: i32 = 4;
    pub const UNDETERMINED: i32 = 5;
}

fn ensure_dir(dir: &Path) -> Result<()> {
    std::fs::create_dir_all(dir)
        .with_context(|| format!("cannot create output directory {}", dir.display()))
}

#[derive(Serialize)]
struct EquilibriumRecord {
    u0: [f64; 2],
    residual: f64,
    monodromy: [[f64; 2]; 2],
    floquet: [[f64; 2]; 2],
    liouville_defect: f64,
}

fn equilibrium_record(eq: &Equilibrium) -> EquilibriumRecord {
    EquilibriumRecord {
        u0: [eq.u0.p, eq.u0.q],
        residual: eq.residual,
        monodromy: [[eq.monodromy.a, eq.monodromy.b], [eq.monodromy.c, eq.monodromy.d]],
        floquet: [
            [eq.floquet.0.re, eq.floquet.0.im],
            [eq.floquet.1.re, eq.floquet.1.im],
        ],
        liouville_defect: eq.liouville_defect(),
    }
}

pub fn cmd_equilibria(config: &RunConfig, config_text: &str, out: &Path) -> Result<i32> {
    ensure_dir(out)?;
    let spec = config.vectorfield.to_spec()?;
    let grid = config.grid.to_grid()?;
    let report = find_equilibria(
        &spec,
        &config.equilibria.seeds(),
        config.equilibria.tolerance(),
        &grid.time,
        config.equilibria.n_steps(),
    )?;

    let records: Vec<EquilibriumRecord> =
        report.equilibria.iter().map(equilibrium_record).collect();
    let json_path = out.join("equilibria.json");
    serde_json::to_writer_pretty(std::fs::File::create(&json_path)?, &records)?;
    let mut outputs = vec![json_path.display().to_string()];
    for (k, eq) in report.equilibria.iter().enumerate() {
        let path = out.join(format!("eq_{k}.csv"));
        io::write_loop_csv(&path, &eq.orbit)?;
        outputs.push(path.display().to_string());
    }

    write_manifest(
        &out.join("equilibria_manifest.json"),
        &Manifest {
            command: "equilibria".into(),
            config_hash: config_hash(config_text),
            seed: None,
            outputs,
            results: json!({
                "found": report.equilibria.len(),
                "failures": report.failures,
            }),
        },
    )?;
    Ok(if report.equilibria.is_empty() {
        exit_code::NO_EQUILIBRIA
    } else {
        exit_code::OK
    })
}

fn build_initial(
    config: &RunConfig,
    grid: crlab_core::grid::CylinderGrid,
    bc: &BoundaryCondition,
) -> Result<Field> {
    let block = config.solver.initial.as_ref();
    let kind = block.map(|b| b.kind.as_str()).unwrap_or(match bc {
        BoundaryCondition::FixedLoops { .. } => "interpolate",
        BoundaryCondition::SPeriodic { .. } => "circle_ansatz",
    });
    match kind {
        "interpolate" | "transition" => {
            let (left, right) = match bc {
                BoundaryCondition::FixedLoops { left, right } => (left, right),
                _ => bail!("`{kind}` initial fields need fixed loop boundaries"),
            };
            let span = grid.s_max - grid.s_min;
            let mid = 0.5 * (grid.s_min + grid.s_max);
            let width = block.and_then(|b| b.width).unwrap_or(2.0);
            let n_t = grid.n_t();
            Ok(Field::from_fn(grid, |s, t| {
                let lam = if kind == "interpolate" {
                    (s - grid.s_min) / span
                } else {
                    0.5 * (((s - mid) / width).tanh() + 1.0)
                };
                let j = (t * n_t as f64).round() as usize % n_t;
                left.values()[j] * (1.0 - lam) + right.values()[j] * lam
            }))
        }
        "circle_ansatz" => {
            let radius = block
                .and_then(|b| b.radius)
                .context("circle_ansatz initial needs `radius`")?;
            let turns = block.and_then(|b| b.turns).unwrap_or(1.0);
            let span = grid.s_max - grid.s_min;
            Ok(Field::from_fn(grid, |s, _t| {
                let th = 2.0 * std::f64::consts::PI * turns * (s - grid.s_min) / span;
                PlanePoint::new(radius * th.cos(), radius * th.sin())
            }))
        }
        "file" => {
            let path = block
                .and_then(|b| b.path.clone())
                .context("file initial needs `path`")?;
            Ok(io::read_field(&path)?)
        }
        other => bail!("unknown initial field kind `{other}`"),
    }
}

pub fn cmd_solve(config: &RunConfig, config_text: &str, out: &Path) -> Result<i32> {
    ensure_dir(out)?;
    let spec = config.vectorfield.to_spec()?;
    let grid = config.grid.to_grid()?;
    let solver_cfg = config.solver.to_config();
    let bc_block = config.solver.bc.as_ref().context("solve needs a [solver.bc] block")?;
    let bc = match bc_block.kind.as_str() {
        "fixed_loops" => {
            let left = bc_block
                .left
                .as_ref()
                .context("fixed_loops needs `left`")?
                .resolve(grid.time, &spec)?;
            let right = bc_block
                .right
                .as_ref()
                .context("fixed_loops needs `right`")?
                .resolve(grid.time, &spec)?;
            BoundaryCondition::FixedLoops { left, right }
        }
        "s_periodic" => BoundaryCondition::SPeriodic {
            period_guess: bc_block
                .period_guess
                .context("s_periodic needs `period_guess`")?,
        },
        other => bail!("unknown boundary condition `{other}`"),
    };
    let initial = build_initial(config, grid, &bc)?;
    let report = newton_solve(&spec, &initial, &bc, &solver_cfg)?;

    let field_path = out.join("solution.crpb");
    io::write_field_binary(&field_path, &report.field)?;
    write_manifest(
        &out.join("solve_manifest.json"),
        &Manifest {
            command: "solve".into(),
            config_hash: config_hash(config_text),
            seed: None,
            outputs: vec![field_path.display().to_string()],
            results: json!({
                "converged": report.converged,
                "residual_sup": report.residual_sup,
                "newton_iterations": report.newton_iterations,
                "period": report.period,
                "residual_history": report.residual_history,
                "message": report.message,
                "grid": {
                    "s_min": report.field.grid().s_min,
                    "s_max": report.field.grid().s_max,
                    "n_s": report.field.grid().n_s,
                    "n_t": report.field.grid().n_t(),
                },
            }),
        },
    )?;
    Ok(if report.converged { exit_code::OK } else { exit_code::SOLVER_FAILED })
}

/// A stored window is treated as s-periodic when its end slices agree.
fn looks_periodic(field: &Field) -> bool {
    let n_s = field.grid().n_s;
    let gap = field
        .loop_at(0)
        .sup_dist(&field.loop_at(n_s - 1))
        .unwrap_or(f64::INFINITY);
    gap <= 1e-8 * field.sup_norm().max(1.0)
}

pub fn cmd_classify(
    config: &RunConfig,
    config_text: &str,
    solution: &Path,
    out: &Path,
) -> Result<i32> {
    ensure_dir(out)?;
    let spec = config.vectorfield.to_spec()?;
    let field = io::read_field(solution)?;

    let eq_report = find_equilibria(
        &spec,
        &config.equilibria.seeds(),
        config.equilibria.tolerance(),
        &field.grid().time,
        config.equilibria.n_steps(),
    )?;
    let eqs = eq_report.equilibria;

    // Periodic windows are tiled so the tail analysis sees several periods.
    let analysis_field = if looks_periodic(&field) {
        field.tile_periodic(config.analysis.tiles())?
    } else {
        field.clone()
    };
    let classify_cfg = config.analysis.to_classify_config();
    let report = classify_omega(&analysis_field, &eqs, &classify_cfg, Some(&spec));

    let t0 = config.analysis.t0();
    let mut outputs = Vec::new();

    // Plane trajectory of the tail window under the projection.
    let grid = analysis_field.grid();
    let tail_start = grid.n_s - (grid.n_s as f64 * classify_cfg.tail_fraction) as usize;
    let mut rows = Vec::new();
    for i in tail_start..grid.n_s {
        let sigma = grid.s_node(i);
        rows.push((sigma, project(&analysis_field, sigma, t0)?));
    }
    let traj_path = out.join("pi_trajectory.csv");
    io::write_trajectory_csv(&traj_path, &rows)?;
    outputs.push(traj_path.display().to_string());

    // Winding trace evidence: periodic orbits against their own half-window
    // shift, chains against the matched equilibrium.
    let delta_valid = config
        .analysis
        .delta_valid
        .unwrap_or_else(|| default_delta_valid(&analysis_field, &analysis_field));
    let trace_partner: Option<Field> = match &report.verdict {
        Verdict::PeriodicOrbit { .. } => {
            let half = grid.n_s / 2;
            let mut values = Vec::with_capacity(analysis_field.values().len());
            for i in 0..grid.n_s {
                values.extend_from_slice(analysis_field.slice_at((i + half) % (grid.n_s - 1)));
            }
            Field::new(*grid, values).ok()
        }
        Verdict::EquilibriaChain { matches } => matches.first().map(|m| {
            Field::constant_from_loop(*grid, &eqs[m.eq_index].orbit)
        }),
        Verdict::Undetermined { .. } => None,
    };
    if let Some(partner) = trace_partner {
        let trace = w_trace(&analysis_field, &partner, delta_valid)?;
        let trace_path = out.join("wtrace.csv");
        io::write_wtrace_csv(&trace_path, &trace)?;
        outputs.push(trace_path.display().to_string());
    }

    // Projection-injectivity report for periodic verdicts.
    let projection = match &report.verdict {
        Verdict::PeriodicOrbit { .. } => {
            let proj = projection_injectivity(&report, t0, config.analysis.n_samples())?;
            let path = out.join("projection.json");
            serde_json::to_writer_pretty(std::fs::File::create(&path)?, &proj)?;
            outputs.push(path.display().to_string());
            Some(proj)
        }
        _ => None,
    };

    let limitset_path = out.join("limitset.json");
    serde_json::to_writer_pretty(
        std::fs::File::create(&limitset_path)?,
        &json!({
            "verdict": report.verdict,
            "evidence": report.evidence,
        }),
    )?;
    outputs.push(limitset_path.display().to_string());

    let undetermined = matches!(report.verdict, Verdict::Undetermined { .. });
    write_manifest(
        &out.join("classify_manifest.json"),
        &Manifest {
            command: "classify".into(),
            config_hash: config_hash(config_text),
            seed: None,
            outputs,
            results: json!({
                "verdict": report.verdict,
                "evidence": report.evidence,
                "injective": projection.map(|p| p.injective),
                "solution": solution.display().to_string(),
                "tiled": looks_periodic(&field),
            }),
        },
    )?;
    Ok(if undetermined { exit_code::UNDETERMINED } else { exit_code::OK })
}

pub fn cmd_axioms(
    config: &RunConfig,
    config_text: &str,
    solutions: &[PathBuf],
    out: &Path,
) -> Result<i32> {
    ensure_dir(out)?;
    if solutions.len() < 2 {
        bail!("axioms needs at least two solution artifacts");
    }
    let mut fields = Vec::new();
    for path in solutions {
        fields.push(io::read_field(path)?);
    }
    let grid = *fields[0].grid();
    for (k, f) in fields.iter().enumerate() {
        if *f.grid() != grid {
            bail!("solution {k} is on a different grid");
        }
    }
    let mut pairs = Vec::new();
    for a in 0..fields.len() {
        for b in (a + 1)..fields.len() {
            if is_diagonal_pair(&fields[a], &fields[b]) {
                bail!(
                    "solutions {a} and {b} are identical: the pair lies on the diagonal \
                     and has no valid winding samples"
                );
            }
            pairs.push((a, b));
        }
    }
    let delta_valid = config.analysis.delta_valid.unwrap_or_else(|| {
        pairs
            .iter()
            .map(|&(a, b)| default_delta_valid(&fields[a], &fields[b]))
            .fold(0.0, f64::max)
    });
    let report =
        crlab_core::axioms::axioms_report(&fields, &pairs, delta_valid, config.analysis.t0())?;

    let path = out.join("axioms.json");
    serde_json::to_writer_pretty(std::fs::File::create(&path)?, &report)?;
    write_manifest(
        &out.join("axioms_manifest.json"),
        &Manifest {
            command: "axioms".into(),
            config_hash: config_hash(config_text),
            seed: None,
            outputs: vec![path.display().to_string()],
            results: json!({
                "all_pass": report.all_pass(),
                "pairs": report.pairs.len(),
            }),
        },
    )?;
    Ok(if report.all_pass() { exit_code::OK } else { 1 })
}

pub fn cmd_generate(
    config: &RunConfig,
    config_text: &str,
    out: &Path,
    seed: u64,
) -> Result<i32> {
    ensure_dir(out)?;
    let grid = config.grid.to_grid()?;
    let block: &GenerateBlock =
        config.generate.as_ref().context("generate needs a [generate] block")?;
    let mut outputs = Vec::new();
    match block.kind.as_str() {
        "constant" => {
            let v = block.value.context("constant generator needs `value`")?;
            let field = Field::constant(grid, PlanePoint::new(v[0], v[1]));
            let path = out.join("gen_constant.crpb");
            io::write_field_binary(&path, &field)?;
            outputs.push(path.display().to_string());
        }
        "holomorphic_mode" => {
            let field = generate::holomorphic_mode(grid);
            let path = out.join("gen_mode.crpb");
            io::write_field_binary(&path, &field)?;
            outputs.push(path.display().to_string());
        }
        "crossing_pair" => {
            let (a, b) = generate::crossing_pair(grid);
            let pa = out.join("gen_pair_a.crpb");
            let pb = out.join("gen_pair_b.crpb");
            io::write_field_binary(&pa, &a)?;
            io::write_field_binary(&pb, &b)?;
            outputs.push(pa.display().to_string());
            outputs.push(pb.display().to_string());
        }
        "planar_transient" => {
            let start = block.start.context("planar_transient needs `start`")?;
            let spec = config.vectorfield.to_spec()?;
            let field =
                generate::planar_transient(grid, &spec, PlanePoint::new(start[0], start[1]))?;
            let path = out.join("gen_transient.crpb");
            io::write_field_binary(&path, &field)?;
            outputs.push(path.display().to_string());
        }
        "random_bump" => {
            let field = generate::random_bump(grid, seed);
            let path = out.join("gen_bump.crpb");
            io::write_field_binary(&path, &field)?;
            outputs.push(path.display().to_string());
        }
        other => bail!("unknown generator `{other}`"),
    }
    write_manifest(
        &out.join("generate_manifest.json"),
        &Manifest {
            command: "generate".into(),
            config_hash: config_hash(config_text),
            seed: Some(seed),
            outputs,
            results: json!({ "kind": block.kind }),
        },
    )?;
    Ok(exit_code::OK)
}

pub fn cmd_plot_data(solutions: &[PathBuf], sigmas: &[f64], out: &Path) -> Result<i32> {
    ensure_dir(out)?;
    for (k, path) in solutions.iter().enumerate() {
        let field = io::read_field(path)?;
        let grid = field.grid();
        let positions: Vec<f64> = if sigmas.is_empty() {
            (0..5)
                .map(|i| grid.s_min + (grid.s_max - grid.s_min) * i as f64 / 4.0)
                .collect()
        } else {
            sigmas.to_vec()
        };
        for (idx, &sigma) in positions.iter().enumerate() {
            let loop_ = crlab_core::limitset::shift(&field, sigma)?;
            let csv = out.join(format!("loop_{k}_{idx}.csv"));
            io::write_loop_csv(&csv, &loop_)?;
        }
    }
    Ok(exit_code::OK)
}

trait FieldExt {
    fn constant_from_loop(grid: crlab_core::grid::CylinderGrid, l: &Loop) -> Field;
}

impl FieldExt for Field {
    fn constant_from_loop(grid: crlab_core::grid::CylinderGrid, l: &Loop) -> Field {
        let mut values = Vec::with_capacity(grid.node_count());
        for _ in 0..grid.n_s {
            values.extend_from_slice(l.values());
        }
        Field::new(grid, values).expect("loop matches the grid")
    }
}
