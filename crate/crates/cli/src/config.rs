//! Declarative run configuration: a single TOML file with nested blocks.
//! Unknown keys are rejected so runs stay reviewable and diffable.

use anyhow::{bail, Context, Result};
use crlab_core::field::Loop;
use crlab_core::grid::{CylinderGrid, TimeGrid};
use crlab_core::limitset::ClassifyConfig;
use crlab_core::plane::PlanePoint;
use crlab_core::solver::{GmresConfig, SolverConfig};
use crlab_core::vectorfield::{HamiltonianKind, PolyTerm, VectorFieldSpec};
use serde::Deserialize;
use std::path::{Path, PathBuf};

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub output_dir: Option<PathBuf>,
    pub vectorfield: VectorFieldBlock,
    pub grid: GridBlock,
    #[serde(default)]
    pub solver: SolverBlock,
    #[serde(default)]
    pub analysis: AnalysisBlock,
    #[serde(default)]
    pub equilibria: EquilibriaBlock,
    pub generate: Option<GenerateBlock>,
}

impl RunConfig {
    pub fn load(path: &Path) -> Result<(Self, String)> {
        let text = std::fs::read_to_string(path)
            .with_context(|| format!("cannot read config {}", path.display()))?;
        let cfg: RunConfig = toml::from_str(&text)
            .with_context(|| format!("cannot parse config {}", path.display()))?;
        Ok((cfg, text))
    }
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct VectorFieldBlock {
    pub kind: String,
    pub rate: Option<f64>,
    pub coeff: Option<f64>,
    pub mu: Option<f64>,
    pub omega: Option<f64>,
    pub terms: Option<Vec<TermBlock>>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TermBlock {
    pub component: usize,
    pub p_exp: u32,
    pub q_exp: u32,
    #[serde(default)]
    pub fourier: i32,
    pub coeff: f64,
}

impl VectorFieldBlock {
    pub fn to_spec(&self) -> Result<VectorFieldSpec> {
        match self.kind.as_str() {
            "zero" => Ok(VectorFieldSpec::Zero),
            "linear_rotation" => {
                let rate = self.rate.context("linear_rotation needs `rate`")?;
                Ok(VectorFieldSpec::LinearRotation { rate })
            }
            "quadratic" => {
                let coeff = self.coeff.context("quadratic needs `coeff`")?;
                Ok(VectorFieldSpec::Hamiltonian(HamiltonianKind::Quadratic { coeff }))
            }
            "pendulum" => Ok(VectorFieldSpec::Hamiltonian(HamiltonianKind::Pendulum)),
            "hopf" => {
                let mu = self.mu.context("hopf needs `mu`")?;
                let omega = self.omega.context("hopf needs `omega`")?;
                Ok(VectorFieldSpec::HopfGradientPair { mu, omega })
            }
            "custom" => {
                let terms = self.terms.as_ref().context("custom needs `terms`")?;
                Ok(VectorFieldSpec::Custom(
                    terms
                        .iter()
                        .map(|t| {
                            if t.component > 1 {
                                bail!("term component must be 0 or 1");
                            }
                            Ok(PolyTerm {
                                component: t.component,
                                p_exp: t.p_exp,
                                q_exp: t.q_exp,
                                fourier: t.fourier,
                                coeff: t.coeff,
                            })
                        })
                        .collect::<Result<Vec<_>>>()?,
                ))
            }
            other => bail!("unknown vector field kind `{other}`"),
        }
    }
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridBlock {
    pub s_min: f64,
    pub s_max: f64,
    pub n_s: usize,
    pub n_t: usize,
}

impl GridBlock {
    pub fn to_grid(&self) -> Result<CylinderGrid> {
        Ok(CylinderGrid::new(
            self.s_min,
            self.s_max,
            self.n_s,
            TimeGrid::new(self.n_t)?,
        )?)
    }
}

#[derive(Debug, Deserialize, Default)]
#[serde(deny_unknown_fields)]
pub struct SolverBlock {
    pub tolerance: Option<f64>,
    pub max_iter: Option<usize>,
    pub gmres_restart: Option<usize>,
    pub gmres_max_iter: Option<usize>,
    pub gmres_tol: Option<f64>,
    pub bound: Option<f64>,
    pub bc_slack: Option<f64>,
    pub stabilization: Option<f64>,
    pub forcing: Option<f64>,
    pub forcing_floor: Option<f64>,
    pub damping_floor_exp: Option<i32>,
    pub max_step: Option<f64>,
    pub bc: Option<BcBlock>,
    pub initial: Option<InitialBlock>,
}

impl SolverBlock {
    pub fn to_config(&self) -> SolverConfig {
        let defaults = SolverConfig::default();
        SolverConfig {
            tol: self.tolerance.unwrap_or(defaults.tol),
            max_iter: self.max_iter.unwrap_or(defaults.max_iter),
            gmres: GmresConfig {
                restart: self.gmres_restart.unwrap_or(defaults.gmres.restart),
                max_iter: self.gmres_max_iter.unwrap_or(defaults.gmres.max_iter),
                tol: self.gmres_tol.unwrap_or(defaults.gmres.tol),
            },
            damping_floor: self
                .damping_floor_exp
                .map(|e| 2f64.powi(-e))
                .unwrap_or(defaults.damping_floor),
            bound: self.bound.unwrap_or(defaults.bound),
            bc_slack: self.bc_slack.unwrap_or(defaults.bc_slack),
            stabilization: self.stabilization.unwrap_or(defaults.stabilization),
            forcing: self.forcing.unwrap_or(defaults.forcing),
            forcing_floor: self.forcing_floor.unwrap_or(defaults.forcing_floor),
            max_step: self.max_step.unwrap_or(defaults.max_step),
        }
    }
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BcBlock {
    pub kind: String,
    pub period_guess: Option<f64>,
    pub left: Option<LoopBlock>,
    pub right: Option<LoopBlock>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LoopBlock {
    pub kind: String,
    pub value: Option<[f64; 2]>,
    #[serde(default)]
    pub center: Option<[f64; 2]>,
    pub radius: Option<f64>,
    pub turns: Option<i64>,
    pub seed: Option<[f64; 2]>,
}

impl LoopBlock {
    /// Resolve to a loop on the given time grid; `equilibrium` sources run a
    /// shooting solve from the given seed.
    pub fn resolve(&self, time: TimeGrid, spec: &VectorFieldSpec) -> Result<Loop> {
        match self.kind.as_str() {
            "constant" => {
                let v = self.value.context("constant loop needs `value`")?;
                Ok(Loop::constant(time, PlanePoint::new(v[0], v[1])))
            }
            "circle" => {
                let radius = self.radius.context("circle loop needs `radius`")?;
                let center = self.center.unwrap_or([0.0, 0.0]);
                let turns = self.turns.unwrap_or(1);
                Ok(crlab_core::generate::circle_loop(
                    time,
                    PlanePoint::new(center[0], center[1]),
                    radius,
                    turns,
                ))
            }
            "equilibrium" => {
                let seed = self.seed.context("equilibrium loop needs `seed`")?;
                let report = crlab_core::equilibria::find_equilibria(
                    spec,
                    &[PlanePoint::new(seed[0], seed[1])],
                    1e-12,
                    &time,
                    512,
                )?;
                let eq = report
                    .equilibria
                    .into_iter()
                    .next()
                    .context("no equilibrium found from the given seed")?;
                Ok(eq.orbit)
            }
            other => bail!("unknown loop kind `{other}`"),
        }
    }
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InitialBlock {
    pub kind: String,
    pub width: Option<f64>,
    pub radius: Option<f64>,
    pub turns: Option<f64>,
    pub path: Option<PathBuf>,
}

#[derive(Debug, Deserialize, Default)]
#[serde(deny_unknown_fields)]
pub struct AnalysisBlock {
    pub t0: Option<f64>,
    pub delta_valid: Option<f64>,
    pub tail_fraction: Option<f64>,
    pub recurrence_tol: Option<f64>,
    pub eq_match_tol: Option<f64>,
    pub n_samples: Option<usize>,
    pub tiles: Option<usize>,
    pub min_period_steps: Option<usize>,
}

impl AnalysisBlock {
    pub fn t0(&self) -> f64 {
        self.t0.unwrap_or(0.0)
    }

    pub fn n_samples(&self) -> usize {
        self.n_samples.unwrap_or(64)
    }

    pub fn tiles(&self) -> usize {
        self.tiles.unwrap_or(8)
    }

    pub fn to_classify_config(&self) -> ClassifyConfig {
        let defaults = ClassifyConfig::default();
        ClassifyConfig {
            tail_fraction: self.tail_fraction.unwrap_or(defaults.tail_fraction),
            recurrence_tol: self.recurrence_tol.unwrap_or(defaults.recurrence_tol),
            eq_match_tol: self.eq_match_tol.unwrap_or(defaults.eq_match_tol),
            min_period_steps: self.min_period_steps.unwrap_or(defaults.min_period_steps),
        }
    }
}

#[derive(Debug, Deserialize, Default)]
#[serde(deny_unknown_fields)]
pub struct EquilibriaBlock {
    pub seeds: Option<Vec<[f64; 2]>>,
    pub tolerance: Option<f64>,
    pub n_steps: Option<usize>,
}

impl EquilibriaBlock {
    pub fn seeds(&self) -> Vec<PlanePoint> {
        match &self.seeds {
            Some(list) => list.iter().map(|s| PlanePoint::new(s[0], s[1])).collect(),
            None => crlab_core::equilibria::default_seed_lattice(),
        }
    }

    pub fn tolerance(&self) -> f64 {
        self.tolerance.unwrap_or(1e-12)
    }

    pub fn n_steps(&self) -> usize {
        self.n_steps.unwrap_or(512)
    }
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GenerateBlock {
    pub kind: String,
    pub value: Option<[f64; 2]>,
    pub start: Option<[f64; 2]>,
}
