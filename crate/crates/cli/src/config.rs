//! Run configuration: one structured text file drives every command.
//!
//! The file is TOML with one section per pipeline stage. Build-relevant
//! sections are hashed into every artifact so that stale artifact/config
//! combinations are rejected instead of silently mixed.

use std::path::PathBuf;

use serde::Deserialize;

use mfcontrol::grid::{ActionGrid, BoxBounds, StateGrid};
use mfcontrol::mdp::{McConfig, WeightScheme};
use mfcontrol::model::{AgentModel, Noise};
use mfcontrol::registry;

use crate::Failure;

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub model: ModelSection,
    #[serde(default)]
    pub grid: GridSection,
    #[serde(default)]
    pub actions: ActionSection,
    #[serde(default)]
    pub build: BuildSection,
    pub run: RunSection,
    #[serde(default)]
    pub solve: SolveSection,
    #[serde(default)]
    pub simulate: SimulateSection,
    #[serde(default)]
    pub regret: RegretSection,
    pub sweep: Option<SweepSection>,
    #[serde(default)]
    pub check: CheckSection,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelSection {
    /// Registry name; exclusive with `inline`.
    pub name: Option<String>,
    /// Discount override applied on top of the named or inline model.
    pub beta: Option<f64>,
    pub inline: Option<InlineModel>,
}

/// Scalar linear family for configs that do not reference the registry:
/// `x' = clamp(a x + b u + c m + w + w0)`, `cost = (x - q m)^2 + r u^2`
/// where `m` is the mean-field mean.
#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InlineModel {
    pub a: f64,
    pub b: f64,
    #[serde(default)]
    pub c: f64,
    pub lo: f64,
    pub hi: f64,
    #[serde(default)]
    pub q: f64,
    #[serde(default)]
    pub r: f64,
    /// (atom, probability) pairs; empty means no noise.
    #[serde(default)]
    pub idio: Vec<(f64, f64)>,
    #[serde(default)]
    pub common: Vec<(f64, f64)>,
    pub k_f: f64,
    pub k_c: f64,
    pub beta: f64,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridSection {
    /// Uniform cell count over the model's state box.
    pub cells: Option<usize>,
    /// Explicit 1-D cell boundaries; exclusive with `cells`.
    pub boundaries: Option<Vec<f64>>,
    /// Optional representative per cell, only with `boundaries`.
    pub representatives: Option<Vec<f64>>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ActionSection {
    /// 1-D action atoms; defaults to the registry's atoms for named models.
    pub atoms: Option<Vec<f64>>,
    pub lo: Option<f64>,
    pub hi: Option<f64>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BuildSection {
    /// "finite-population" | "aggregation" | "sampling".
    #[serde(default = "default_kind")]
    pub kind: String,
    /// Population size N for the finite-population kind.
    #[serde(default = "default_agents")]
    pub agents: u32,
    /// Grid resolution n for the aggregation and sampling kinds.
    #[serde(default = "default_n")]
    pub n: u32,
    /// "dirac" | "sampled-uniform".
    #[serde(default = "default_scheme")]
    pub scheme: String,
    #[serde(default = "default_scheme_samples")]
    pub scheme_samples: usize,
    #[serde(default = "default_mc_samples")]
    pub kernel_samples: usize,
    #[serde(default = "default_mc_samples")]
    pub common_samples: usize,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunSection {
    /// Mandatory: every command must be reproducible from the file alone.
    pub seed: u64,
    pub out: Option<PathBuf>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SolveSection {
    #[serde(default = "default_tol")]
    pub tol: f64,
    #[serde(default = "default_max_iter")]
    pub max_iter: usize,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SimulateSection {
    #[serde(default = "default_sim_agents")]
    pub agents: usize,
    #[serde(default = "default_horizon")]
    pub horizon: usize,
    #[serde(default = "default_sim_rollouts")]
    pub rollouts: usize,
    /// "full" | "aggregated" | "sampled".
    #[serde(default = "default_feedback")]
    pub feedback: String,
    /// Resolution for aggregated/sampled feedback; defaults to build.n.
    pub feedback_n: Option<u32>,
    #[serde(default = "default_true")]
    pub resample: bool,
    /// Initial 1-D agent positions; defaults to a seeded uniform cloud.
    pub init: Option<Vec<f64>>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RegretSection {
    #[serde(default = "default_regret_rollouts")]
    pub rollouts: usize,
    pub horizon: Option<usize>,
    pub agents: Option<usize>,
    /// Reference grid resolution for the baseline value; defaults to
    /// four times the run grid.
    pub baseline_cells: Option<usize>,
    pub init: Option<Vec<f64>>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepSection {
    /// "M" sweeps the state grid, "n" the aggregation/sampling resolution.
    pub parameter: String,
    pub values: Vec<u64>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CheckSection {
    #[serde(default = "default_pairs")]
    pub pairs: usize,
    #[serde(default = "default_agents")]
    pub oracle_agents: u32,
}

fn default_kind() -> String {
    "finite-population".into()
}
fn default_agents() -> u32 {
    2
}
fn default_n() -> u32 {
    2
}
fn default_scheme() -> String {
    "dirac".into()
}
fn default_scheme_samples() -> usize {
    16
}
fn default_mc_samples() -> usize {
    10_000
}
fn default_tol() -> f64 {
    1e-8
}
fn default_max_iter() -> usize {
    100_000
}
fn default_sim_agents() -> usize {
    8
}
fn default_horizon() -> usize {
    20
}
fn default_sim_rollouts() -> usize {
    100
}
fn default_feedback() -> String {
    "full".into()
}
fn default_true() -> bool {
    true
}
fn default_regret_rollouts() -> usize {
    2000
}
fn default_pairs() -> usize {
    500
}

impl Default for BuildSection {
    fn default() -> Self {
        BuildSection {
            kind: default_kind(),
            agents: default_agents(),
            n: default_n(),
            scheme: default_scheme(),
            scheme_samples: default_scheme_samples(),
            kernel_samples: default_mc_samples(),
            common_samples: default_mc_samples(),
        }
    }
}

impl Default for SolveSection {
    fn default() -> Self {
        SolveSection {
            tol: default_tol(),
            max_iter: default_max_iter(),
        }
    }
}

impl Default for SimulateSection {
    fn default() -> Self {
        SimulateSection {
            agents: default_sim_agents(),
            horizon: default_horizon(),
            rollouts: default_sim_rollouts(),
            feedback: default_feedback(),
            feedback_n: None,
            resample: true,
            init: None,
        }
    }
}

impl Default for RegretSection {
    fn default() -> Self {
        RegretSection {
            rollouts: default_regret_rollouts(),
            horizon: None,
            agents: None,
            baseline_cells: None,
            init: None,
        }
    }
}

impl Default for CheckSection {
    fn default() -> Self {
        CheckSection {
            pairs: default_pairs(),
            oracle_agents: default_agents(),
        }
    }
}

fn usage(msg: impl Into<String>) -> Failure {
    Failure::Usage(msg.into())
}

impl RunConfig {
    pub fn load(path: &std::path::Path) -> Result<RunConfig, Failure> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| usage(format!("cannot read config {}: {e}", path.display())))?;
        let cfg: RunConfig =
            toml::from_str(&text).map_err(|e| usage(format!("config parse error: {e}")))?;
        cfg.validate()?;
        Ok(cfg)
    }

    fn validate(&self) -> Result<(), Failure> {
        match (&self.model.name, &self.model.inline) {
            (Some(name), None) => {
                if !registry::names().contains(&name.as_str()) {
                    return Err(usage(format!(
                        "unknown model {name:?}; registry has {:?}",
                        registry::names()
                    )));
                }
            }
            (None, Some(_)) => {}
            (Some(_), Some(_)) => {
                return Err(usage("model.name and model.inline are exclusive"))
            }
            (None, None) => return Err(usage("config needs model.name or model.inline")),
        }
        if !matches!(
            self.build.kind.as_str(),
            "finite-population" | "aggregation" | "sampling"
        ) {
            return Err(usage(format!(
                "build.kind {:?} is not finite-population | aggregation | sampling",
                self.build.kind
            )));
        }
        if !matches!(self.build.scheme.as_str(), "dirac" | "sampled-uniform") {
            return Err(usage(format!(
                "build.scheme {:?} is not dirac | sampled-uniform",
                self.build.scheme
            )));
        }
        if self.build.agents == 0 || self.build.n == 0 {
            return Err(usage("build.agents and build.n must be at least 1"));
        }
        if !(self.solve.tol > 0.0) {
            return Err(usage("solve.tol must be positive"));
        }
        if self.grid.cells.is_some() && self.grid.boundaries.is_some() {
            return Err(usage("grid.cells and grid.boundaries are exclusive"));
        }
        if self.grid.representatives.is_some() && self.grid.boundaries.is_none() {
            return Err(usage("grid.representatives requires grid.boundaries"));
        }
        if !matches!(
            self.simulate.feedback.as_str(),
            "full" | "aggregated" | "sampled"
        ) {
            return Err(usage(format!(
                "simulate.feedback {:?} is not full | aggregated | sampled",
                self.simulate.feedback
            )));
        }
        Ok(())
    }

    pub fn out_dir(&self) -> PathBuf {
        self.run
            .out
            .clone()
            .unwrap_or_else(|| PathBuf::from("artifacts"))
    }

    pub fn model(&self) -> Result<AgentModel, Failure> {
        let model = match (&self.model.name, &self.model.inline) {
            (Some(name), None) => registry::build(name, self.model.beta)
                .map_err(|e| usage(format!("model build failed: {e}")))?,
            (None, Some(inline)) => {
                let model = inline_model(inline)?;
                match self.model.beta {
                    Some(beta) => model
                        .with_beta(beta)
                        .map_err(|e| usage(format!("model.beta override invalid: {e}")))?,
                    None => model,
                }
            }
            _ => unreachable!("validated at load"),
        };
        Ok(model)
    }

    /// The state grid, optionally at a swept cell count.
    pub fn state_grid(
        &self,
        model: &AgentModel,
        cells_override: Option<usize>,
    ) -> Result<StateGrid, Failure> {
        if let Some(bounds) = &self.grid.boundaries {
            if cells_override.is_some() {
                return Err(usage("cannot sweep M with explicit grid.boundaries"));
            }
            let grid = StateGrid::from_edges(vec![bounds.clone()])
                .map_err(|e| usage(format!("grid.boundaries invalid: {e}")))?;
            return match &self.grid.representatives {
                Some(reps) => grid
                    .with_representatives(reps.iter().map(|&r| vec![r]).collect())
                    .map_err(|e| usage(format!("grid.representatives invalid: {e}"))),
                None => Ok(grid),
            };
        }
        let cells = cells_override.or(self.grid.cells);
        if cells == Some(0) {
            return Err(usage("grid.cells must be at least 1"));
        }
        match &self.model.name {
            // named models ship a sensible default grid
            Some(name) => registry::default_grid(name, cells)
                .map_err(|e| usage(format!("grid construction failed: {e}"))),
            None => StateGrid::uniform(model.state_bounds().clone(), &[cells.unwrap_or(8)])
                .map_err(|e| usage(format!("grid construction failed: {e}"))),
        }
    }

    pub fn action_grid(&self) -> Result<ActionGrid, Failure> {
        if let Some(atoms) = &self.actions.atoms {
            if atoms.is_empty() {
                return Err(usage("actions.atoms must not be empty"));
            }
            let lo = self
                .actions
                .lo
                .unwrap_or_else(|| atoms.iter().cloned().fold(f64::INFINITY, f64::min));
            let hi = self
                .actions
                .hi
                .unwrap_or_else(|| atoms.iter().cloned().fold(f64::NEG_INFINITY, f64::max));
            let bounds = BoxBounds::interval(lo, hi)
                .map_err(|e| usage(format!("actions bounds invalid: {e}")))?;
            return ActionGrid::new(atoms.iter().map(|&u| vec![u]).collect(), bounds)
                .map_err(|e| usage(format!("actions.atoms invalid: {e}")));
        }
        match &self.model.name {
            Some(name) => registry::default_actions(name)
                .map_err(|e| usage(format!("default actions failed: {e}"))),
            None => Err(usage("inline models need explicit actions.atoms")),
        }
    }

    pub fn scheme(&self) -> WeightScheme {
        match self.build.scheme.as_str() {
            "sampled-uniform" => WeightScheme::SampledUniform {
                samples: self.build.scheme_samples,
            },
            _ => WeightScheme::Dirac,
        }
    }

    pub fn mc(&self) -> McConfig {
        McConfig {
            kernel_samples: self.build.kernel_samples,
            common_samples: self.build.common_samples,
        }
    }

    /// FNV-1a of the build-relevant sections; stamped into artifacts.
    pub fn hash(&self) -> u64 {
        let model = match (&self.model.name, &self.model.inline) {
            (Some(name), _) => format!("name={name} beta={:?}", self.model.beta),
            (None, Some(i)) => format!("inline={i:?} beta={:?}", self.model.beta),
            _ => String::new(),
        };
        let canonical = format!(
            "{model}|grid cells={:?} boundaries={:?} reps={:?}|actions atoms={:?} lo={:?} hi={:?}|build kind={} agents={} n={} scheme={} scheme_samples={} kernel_samples={} common_samples={}|seed={}",
            self.grid.cells,
            self.grid.boundaries,
            self.grid.representatives,
            self.actions.atoms,
            self.actions.lo,
            self.actions.hi,
            self.build.kind,
            self.build.agents,
            self.build.n,
            self.build.scheme,
            self.build.scheme_samples,
            self.build.kernel_samples,
            self.build.common_samples,
            self.run.seed,
        );
        fnv1a64(canonical.as_bytes())
    }
}

fn inline_model(p: &InlineModel) -> Result<AgentModel, Failure> {
    let idio = if p.idio.is_empty() {
        Noise::none()
    } else {
        Noise::atoms(p.idio.clone()).map_err(|e| usage(format!("model.inline.idio: {e}")))?
    };
    let common = if p.common.is_empty() {
        Noise::none()
    } else {
        Noise::atoms(p.common.clone()).map_err(|e| usage(format!("model.inline.common: {e}")))?
    };
    let (a, b, c, lo, hi, q, r) = (p.a, p.b, p.c, p.lo, p.hi, p.q, p.r);
    AgentModel::builder()
        .name("inline")
        .state_bounds(
            BoxBounds::interval(lo, hi).map_err(|e| usage(format!("model.inline bounds: {e}")))?,
        )
        .action_bounds(
            BoxBounds::interval(-1.0, 1.0).map_err(|e| usage(e.to_string()))?,
        )
        .dynamics(move |x, u, mf, w, w0| {
            vec![(a * x[0] + b * u[0] + c * mf.mean(0) + w + w0).clamp(lo, hi)]
        })
        .stage_cost(move |x, u, mf| {
            let gap = x[0] - q * mf.mean(0);
            gap * gap + r * u[0] * u[0]
        })
        .idio_noise(idio)
        .common_noise(common)
        .lipschitz(p.k_f, p.k_c)
        .beta(p.beta)
        .build()
        .map_err(|e| usage(format!("model.inline invalid: {e}")))
}

pub fn fnv1a64(bytes: &[u8]) -> u64 {
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    for &b in bytes {
        h ^= u64::from(b);
        h = h.wrapping_mul(0x0000_0100_0000_01b3);
    }
    h
}
