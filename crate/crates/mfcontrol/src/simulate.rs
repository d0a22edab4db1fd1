//! Rollouts of the continuous `N`-agent system under symmetric agent
//! policies, and a brute-force centralized oracle for tiny instances.
//!
//! A rollout consumes randomness in a fixed order each step: feedback
//! sampling draws (when the sampled channel refreshes), then one action
//! draw per agent in agent order, then the shared common-noise value, then
//! one idiosyncratic draw per agent in agent order. Rollouts are
//! parallelized with per-rollout streams derived from (seed, rollout
//! index), so estimates are reproducible at any thread count.

use crate::error::Error;
use crate::grid::{ActionGrid, BoxBounds, StateGrid};
use crate::measures::{enumerate_pn, nearest_in, EmpiricalMeasure, PointCloudMeasure};
use crate::model::{AgentModel, MeanField};
use crate::seeding;
use crate::solver::{value_iteration_tables, AgentPolicy, SolveResult};
use crate::Result;
use rand::Rng;
use rayon::prelude::*;

/// Kernel-entry cap for the brute-force oracle: `|X|^N * |U|^N` pairs.
pub const ORACLE_PAIR_CAP: u128 = 10_000_000;

/// What each agent observes about the population before acting.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Feedback {
    /// The empirical cell measure of all `N` agents.
    Full,
    /// The full measure projected onto the `1/n` grid.
    Aggregated { n: u32 },
    /// The cell measure of `n` agents drawn uniformly with replacement;
    /// `resample` redraws them every step (the default recipe), otherwise
    /// the draw at step 0 is kept for the whole rollout.
    Sampled { n: u32, resample: bool },
}

/// One simulation request.
#[derive(Debug, Clone, Copy)]
pub struct RolloutConfig {
    pub agents: usize,
    pub horizon: usize,
    pub rollouts: usize,
    pub seed: u64,
    pub feedback: Feedback,
}

/// Discounted-cost estimate with its two error terms.
#[derive(Debug, Clone, Copy)]
pub struct CostEstimate {
    pub mean: f64,
    pub stderr: f64,
    /// `beta^T ||c||_inf / (1 - beta)`: the tail cut off at the horizon.
    pub truncation_bound: f64,
}

/// One row of a recorded trajectory.
#[derive(Debug, Clone)]
pub struct StepRecord {
    pub t: usize,
    pub rollout: usize,
    pub agent: usize,
    pub state: Vec<f64>,
    pub action: Vec<f64>,
    pub cost: f64,
}

/// Deterministic sup of `|c|` over grid representatives, action atoms, and
/// the Dirac/uniform measures on the representatives.
pub fn sup_cost(model: &AgentModel, grid: &StateGrid, actions: &ActionGrid) -> f64 {
    let reps = grid.representatives();
    let mut measures: Vec<MeanField> = reps
        .iter()
        .map(|r| MeanField::from_cloud(std::slice::from_ref(r)))
        .collect();
    measures.push(MeanField::from_cloud(reps));
    let mut sup = 0.0f64;
    for x in reps {
        for u in actions.atoms() {
            for mf in &measures {
                sup = sup.max(model.cost(x, u, mf).abs());
            }
        }
    }
    sup
}

/// `beta^T * sup_c / (1 - beta)`.
pub fn truncation_bound(beta: f64, sup_c: f64, horizon: usize) -> f64 {
    beta.powi(horizon as i32) * sup_c / (1.0 - beta)
}

/// Smallest horizon whose truncation bound is at most `tol`.
pub fn horizon_for_tolerance(beta: f64, sup_c: f64, tol: f64) -> usize {
    if sup_c <= 0.0 {
        return 1;
    }
    let mut t = 1usize;
    while truncation_bound(beta, sup_c, t) > tol && t < 1_000_000 {
        t += 1;
    }
    t
}

/// Uniform i.i.d. initial cloud inside the state box.
pub fn initial_cloud_uniform(bounds: &BoxBounds, agents: usize, seed: u64) -> PointCloudMeasure {
    let mut rng = seeding::stream(&[seed, 0x1217]);
    PointCloudMeasure::new((0..agents).map(|_| bounds.sample(&mut rng)).collect())
        .expect("agents >= 1")
}

/// Simulates the policy through the configured feedback channel and
/// estimates the discounted team cost over `cfg.rollouts` rollouts.
pub fn rollout_team(
    model: &AgentModel,
    grid: &StateGrid,
    policy: &AgentPolicy,
    init: &PointCloudMeasure,
    cfg: &RolloutConfig,
) -> Result<CostEstimate> {
    validate_rollout(model, grid, policy, init, cfg)?;
    let candidates = aggregation_candidates(grid, &cfg.feedback)?;
    let totals: Result<Vec<f64>> = (0..cfg.rollouts)
        .into_par_iter()
        .map(|r| run_rollout(model, grid, policy, init, cfg, &candidates, r, None))
        .collect();
    let totals = totals?;
    let mean = totals.iter().sum::<f64>() / totals.len() as f64;
    let stderr = if totals.len() > 1 {
        let var = totals.iter().map(|t| (t - mean) * (t - mean)).sum::<f64>()
            / (totals.len() - 1) as f64;
        (var / totals.len() as f64).sqrt()
    } else {
        0.0
    };
    let atoms = ActionGrid::new(policy.atoms().to_vec(), model.action_bounds().clone())?;
    let sup = sup_cost(model, grid, &atoms);
    Ok(CostEstimate {
        mean,
        stderr,
        truncation_bound: truncation_bound(model.beta(), sup, cfg.horizon),
    })
}

/// As [`rollout_team`] for one rollout index, also returning the full
/// per-agent trajectory. The trajectory matches what [`rollout_team`]
/// simulates for that index exactly.
pub fn rollout_recorded(
    model: &AgentModel,
    grid: &StateGrid,
    policy: &AgentPolicy,
    init: &PointCloudMeasure,
    cfg: &RolloutConfig,
    rollout: usize,
) -> Result<(f64, Vec<StepRecord>)> {
    validate_rollout(model, grid, policy, init, cfg)?;
    let candidates = aggregation_candidates(grid, &cfg.feedback)?;
    let mut records = Vec::new();
    let total = run_rollout(
        model,
        grid,
        policy,
        init,
        cfg,
        &candidates,
        rollout,
        Some(&mut records),
    )?;
    Ok((total, records))
}

fn validate_rollout(
    model: &AgentModel,
    grid: &StateGrid,
    policy: &AgentPolicy,
    init: &PointCloudMeasure,
    cfg: &RolloutConfig,
) -> Result<()> {
    if cfg.agents != init.len() {
        return Err(Error::SizeMismatch {
            left: cfg.agents,
            right: init.len(),
        });
    }
    if cfg.rollouts == 0 || cfg.horizon == 0 {
        return Err(Error::invalid("need at least one rollout and one step"));
    }
    if policy.num_cells() != grid.num_cells() {
        return Err(Error::SupportMismatch {
            left: policy.num_cells(),
            right: grid.num_cells(),
        });
    }
    if init.dim() != model.state_dim() {
        return Err(Error::SizeMismatch {
            left: init.dim(),
            right: model.state_dim(),
        });
    }
    match cfg.feedback {
        Feedback::Aggregated { n } | Feedback::Sampled { n, .. } if n == 0 => {
            Err(Error::invalid("feedback population n must be at least 1"))
        }
        _ => Ok(()),
    }
}

/// Enumeration of the projection targets for aggregated feedback.
fn aggregation_candidates(
    grid: &StateGrid,
    feedback: &Feedback,
) -> Result<Vec<EmpiricalMeasure>> {
    match feedback {
        Feedback::Aggregated { n } => enumerate_pn(grid.num_cells(), *n),
        _ => Ok(Vec::new()),
    }
}

#[allow(clippy::too_many_arguments)]
fn run_rollout(
    model: &AgentModel,
    grid: &StateGrid,
    policy: &AgentPolicy,
    init: &PointCloudMeasure,
    cfg: &RolloutConfig,
    candidates: &[EmpiricalMeasure],
    rollout: usize,
    mut records: Option<&mut Vec<StepRecord>>,
) -> Result<f64> {
    let n_agents = cfg.agents;
    let m = grid.num_cells();
    let mut rng = seeding::stream(&[cfg.seed, rollout as u64]);
    let mut cloud: Vec<Vec<f64>> = init.points().to_vec();
    let mut fixed_panel: Vec<usize> = Vec::new();
    if let Feedback::Sampled { n, resample: false } = cfg.feedback {
        fixed_panel = (0..n)
            .map(|_| rng.random_range(0..n_agents))
            .collect();
    }
    let mut total = 0.0f64;
    let mut disc = 1.0f64;
    for t in 0..cfg.horizon {
        let cells: Vec<usize> = cloud
            .iter()
            .map(|x| grid.quantize(x))
            .collect::<Result<_>>()?;
        // 1. feedback measure
        let feedback_counts: Vec<u32> = match cfg.feedback {
            Feedback::Full => {
                let mut counts = vec![0u32; m];
                for &c in &cells {
                    counts[c] += 1;
                }
                counts
            }
            Feedback::Aggregated { .. } => {
                let mut counts = vec![0u32; m];
                for &c in &cells {
                    counts[c] += 1;
                }
                let mu = EmpiricalMeasure::new(counts)?.to_simplex();
                let (idx, _) = nearest_in(candidates, &mu);
                candidates[idx].counts().to_vec()
            }
            Feedback::Sampled { n, resample } => {
                let panel: Vec<usize> = if resample {
                    (0..n).map(|_| rng.random_range(0..n_agents)).collect()
                } else {
                    fixed_panel.clone()
                };
                let mut counts = vec![0u32; m];
                for &i in &panel {
                    counts[cells[i]] += 1;
                }
                counts
            }
        };
        let rule = policy.rule_for_measure(&feedback_counts)?;
        // 2. actions, agent order
        let actions: Vec<&[f64]> = cells
            .iter()
            .map(|&c| &policy.atoms()[rule.sample_action(c, &mut rng)][..])
            .collect();
        // stage cost under the continuous empirical measure
        let mf = MeanField::from_cloud(&cloud);
        let costs: Vec<f64> = cloud
            .iter()
            .zip(&actions)
            .map(|(x, u)| model.cost(x, u, &mf))
            .collect();
        let stage = costs.iter().sum::<f64>() / n_agents as f64;
        total += disc * stage;
        if let Some(recs) = records.as_deref_mut() {
            for (i, ((x, u), c)) in cloud.iter().zip(&actions).zip(&costs).enumerate() {
                recs.push(StepRecord {
                    t,
                    rollout,
                    agent: i,
                    state: x.clone(),
                    action: u.to_vec(),
                    cost: *c,
                });
            }
        }
        // 3. shared common noise, then 4. idiosyncratic noise, agent order
        let w0 = model.common_noise().sample(&mut rng);
        cloud = cloud
            .iter()
            .zip(&actions)
            .map(|(x, u)| {
                let w = model.idio_noise().sample(&mut rng);
                model.step(x, u, &mf, w, w0)
            })
            .collect();
        disc *= model.beta();
    }
    Ok(total)
}

/// Exact solution of the centralized MDP on agent-state tuples.
#[derive(Debug, Clone)]
pub struct OracleSolution {
    /// Optimal values indexed by tuple (agent 0's cell varies slowest).
    pub values: Vec<f64>,
    /// Optimal joint-action index per tuple (same radix over atoms).
    pub policy: Vec<usize>,
    /// Value per empirical class, in canonical enumeration order.
    pub reduced: Vec<(EmpiricalMeasure, f64)>,
    /// Largest value spread inside one empirical class: the permutation
    /// invariance defect.
    pub max_class_spread: f64,
    pub gap_history: Vec<f64>,
    cells: usize,
    agents: usize,
}

impl OracleSolution {
    /// Decodes a tuple index into per-agent cells.
    pub fn tuple_cells(&self, mut idx: usize) -> Vec<usize> {
        let mut out = vec![0usize; self.agents];
        for slot in (0..self.agents).rev() {
            out[slot] = idx % self.cells;
            idx /= self.cells;
        }
        out
    }

    pub fn num_tuples(&self) -> usize {
        self.values.len()
    }

    /// Reduced value at the class with these counts, if present.
    pub fn class_value(&self, counts: &[u32]) -> Option<f64> {
        self.reduced
            .iter()
            .find(|(e, _)| e.counts() == counts)
            .map(|&(_, v)| v)
    }
}

/// Solves the full tuple-state MDP with joint actions by value iteration
/// and reduces it to per-distribution values.
///
/// Agents sit at cell representatives; noise must be finite on both
/// channels. The reduction reports how far tuple values deviate within one
/// empirical class, which the theory says should be zero.
pub fn brute_force_oracle(
    model: &AgentModel,
    grid: &StateGrid,
    action_grid: &ActionGrid,
    agents: usize,
    tol: f64,
) -> Result<OracleSolution> {
    let m = grid.num_cells();
    let k = action_grid.len();
    let pairs = (m as u128)
        .checked_pow(agents as u32)
        .and_then(|s| s.checked_mul((k as u128).pow(agents as u32)));
    match pairs {
        Some(p) if p <= ORACLE_PAIR_CAP => {}
        _ => {
            return Err(Error::CapExceeded {
                what: format!("oracle tuples x joint actions for {agents} agents"),
                count: pairs.unwrap_or(u128::MAX),
                cap: ORACLE_PAIR_CAP,
            })
        }
    }
    let idio = model
        .idio_noise()
        .support()
        .ok_or_else(|| Error::invalid("oracle needs finite idiosyncratic noise"))?;
    let common = model
        .common_noise()
        .support()
        .ok_or_else(|| Error::invalid("oracle needs finite common noise"))?;

    let num_states = (m as usize).pow(agents as u32);
    let num_actions = (k as usize).pow(agents as u32);
    let decode = |mut idx: usize, radix: usize| -> Vec<usize> {
        let mut out = vec![0usize; agents];
        for slot in (0..agents).rev() {
            out[slot] = idx % radix;
            idx /= radix;
        }
        out
    };

    let tables: Result<Vec<(Vec<f64>, Vec<Vec<(u32, f64)>>)>> = (0..num_states)
        .into_par_iter()
        .map(|s| {
            let cells = decode(s, m);
            let cloud: Vec<Vec<f64>> = cells
                .iter()
                .map(|&c| grid.representative(c).to_vec())
                .collect();
            let mf = MeanField::from_cloud(&cloud);
            let mut costs = Vec::with_capacity(num_actions);
            let mut rows = Vec::with_capacity(num_actions);
            for a in 0..num_actions {
                let atoms = decode(a, k);
                let actions: Vec<&[f64]> =
                    atoms.iter().map(|&ai| action_grid.atom(ai)).collect();
                let cost = cloud
                    .iter()
                    .zip(&actions)
                    .map(|(x, u)| model.cost(x, u, &mf))
                    .sum::<f64>()
                    / agents as f64;
                costs.push(cost);
                // exact next-tuple law: product over agents per common atom
                let mut row = vec![0.0f64; num_states];
                for &(w0, p0) in common {
                    let dists: Result<Vec<Vec<(usize, f64)>>> = cloud
                        .iter()
                        .zip(&actions)
                        .map(|(x, u)| {
                            let mut d: Vec<(usize, f64)> = Vec::new();
                            for &(w, pw) in idio {
                                let cell = grid.quantize(&model.step(x, u, &mf, w, w0))?;
                                match d.iter_mut().find(|(c, _)| *c == cell) {
                                    Some((_, p)) => *p += pw,
                                    None => d.push((cell, pw)),
                                }
                            }
                            Ok(d)
                        })
                        .collect();
                    let dists = dists?;
                    let mut partial: Vec<(usize, f64)> = vec![(0, p0)];
                    for d in &dists {
                        let mut next = Vec::with_capacity(partial.len() * d.len());
                        for &(idx, p) in &partial {
                            for &(cell, pc) in d {
                                next.push((idx * m + cell, p * pc));
                            }
                        }
                        partial = next;
                    }
                    for (idx, p) in partial {
                        row[idx] += p;
                    }
                }
                rows.push(
                    row.iter()
                        .enumerate()
                        .filter(|&(_, &p)| p > 0.0)
                        .map(|(j, &p)| (j as u32, p))
                        .collect(),
                );
            }
            Ok((costs, rows))
        })
        .collect();
    let tables = tables?;
    let (cost, kernel): (Vec<_>, Vec<_>) = tables.into_iter().unzip();

    let SolveResult {
        values,
        policy,
        gap_history,
        converged,
        ..
    } = value_iteration_tables(&cost, &kernel, model.beta(), tol, 1_000_000)?;
    if !converged {
        return Err(Error::invalid("oracle value iteration did not converge"));
    }

    // Lemma-1 reduction: group tuples by their empirical class
    let classes = enumerate_pn(m, agents as u32)?;
    let mut class_min = vec![f64::INFINITY; classes.len()];
    let mut class_max = vec![f64::NEG_INFINITY; classes.len()];
    let mut class_first = vec![f64::NAN; classes.len()];
    let class_index: std::collections::HashMap<Vec<u32>, usize> = classes
        .iter()
        .enumerate()
        .map(|(i, e)| (e.counts().to_vec(), i))
        .collect();
    for (s, &v) in values.iter().enumerate() {
        let mut counts = vec![0u32; m];
        for c in decode(s, m) {
            counts[c] += 1;
        }
        let i = class_index[&counts];
        if class_first[i].is_nan() {
            class_first[i] = v;
        }
        class_min[i] = class_min[i].min(v);
        class_max[i] = class_max[i].max(v);
    }
    let max_class_spread = class_min
        .iter()
        .zip(&class_max)
        .map(|(lo, hi)| hi - lo)
        .fold(0.0, f64::max);
    let reduced = classes
        .into_iter()
        .zip(&class_first)
        .map(|(e, &v)| (e, v))
        .collect();
    Ok(OracleSolution {
        values,
        policy,
        reduced,
        max_class_spread,
        gap_history,
        cells: m,
        agents,
    })
}

/// Simulated performance of a policy against a baseline value.
#[derive(Debug, Clone, Copy)]
pub struct RegretReport {
    pub simulated: CostEstimate,
    pub baseline: f64,
    pub baseline_tol: f64,
    /// Simulated mean minus baseline.
    pub regret: f64,
    /// Total slack: `3 stderr + truncation + baseline_tol`.
    pub tolerance: f64,
}

/// Rolls the policy out and subtracts the baseline optimal value.
pub fn regret(
    model: &AgentModel,
    grid: &StateGrid,
    policy: &AgentPolicy,
    init: &PointCloudMeasure,
    cfg: &RolloutConfig,
    baseline: f64,
    baseline_tol: f64,
) -> Result<RegretReport> {
    let simulated = rollout_team(model, grid, policy, init, cfg)?;
    Ok(RegretReport {
        simulated,
        baseline,
        baseline_tol,
        regret: simulated.mean - baseline,
        tolerance: 3.0 * simulated.stderr + simulated.truncation_bound + baseline_tol,
    })
}
