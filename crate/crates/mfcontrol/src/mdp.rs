//! Builders for the three finite measure-valued MDPs.
//!
//! All three share the same output type, [`FiniteMeasureMDP`], and differ in
//! what a state and an action mean:
//!
//! - [`build_finite_population_mdp`]: states are the `N`-agent empirical
//!   measures over the grid cells; actions are joint (state, action) count
//!   matrices with matching state marginal. The kernel is the exact law of
//!   the next empirical measure (or a seeded Monte Carlo estimate of it).
//! - [`build_aggregation_mdp`]: states are the same count vectors read as
//!   points of the `1/n` simplex grid; actions are symmetric agent rules on
//!   the same grid. The kernel pushes the measure through the mean-field
//!   flow for each common-noise value and projects back with the
//!   nearest-neighbor map.
//! - [`build_sampling_mdp`]: identical states, actions and costs; the
//!   kernel instead draws `n` agents from the flowed measure, giving a
//!   multinomial row.
//!
//! Builders parallelize over (state, action) pairs. Every pair derives its
//! own random stream from (seed, state index, action index), so results are
//! byte-identical across thread counts.

use crate::error::Error;
use crate::grid::{ActionGrid, StateGrid};
use crate::measures::{
    admissible_actions, enumerate_pn, multiset_count, nearest_in, push_compositions, AgentRule,
    EmpiricalMeasure, JointEmpiricalMeasure, SimplexMeasure, DEFAULT_ENUMERATION_CAP,
};
use crate::model::{AgentModel, MeanField};
use crate::seeding;
use crate::Result;
use rayon::prelude::*;
use std::collections::{BTreeMap, HashMap};

/// Largest idiosyncratic noise-product expansion still computed exactly.
pub const EXACT_NOISE_CAP: u128 = 1_000_000;

/// Kernel entries below this are pruned and the row renormalized.
const PRUNE_EPS: f64 = 1e-12;

/// Row-sum tolerance for exact kernels.
const EXACT_ROW_TOL: f64 = 1e-12;

/// Row-sum tolerance for Monte Carlo kernels.
const MC_ROW_TOL: f64 = 1e-9;

/// How cost and kernel integrals average over the clouds that map to a
/// discretized measure.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum WeightScheme {
    /// Every agent sits exactly at its cell representative.
    Dirac,
    /// Average over clouds drawn uniformly inside the occupied cells.
    SampledUniform { samples: usize },
}

/// Which construction produced an MDP.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MdpKind {
    /// `N`-agent empirical states with joint-measure actions.
    FinitePopulation { agents: u32 },
    /// `1/n`-grid simplex states; flow then nearest-neighbor projection.
    Aggregation { n: u32 },
    /// `1/n`-grid simplex states; flow then an `n`-draw multinomial.
    Sampling { n: u32 },
}

impl MdpKind {
    /// Population parameter of the construction (`N` or `n`).
    pub fn population(&self) -> u32 {
        match *self {
            MdpKind::FinitePopulation { agents } => agents,
            MdpKind::Aggregation { n } | MdpKind::Sampling { n } => n,
        }
    }
}

/// One admissible action of a measure MDP.
#[derive(Debug, Clone, PartialEq)]
pub enum MdpAction {
    /// Joint (cell, atom) counts; the finite-population action.
    Joint(JointEmpiricalMeasure),
    /// Symmetric randomized agent rule; the aggregation/sampling action.
    Rule(AgentRule),
}

/// Monte Carlo sample counts for kernels without a finite expansion.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct McConfig {
    /// Noise samples per (state, action) pair.
    pub kernel_samples: usize,
    /// Common-noise draws when the common noise has no finite support.
    pub common_samples: usize,
}

impl Default for McConfig {
    fn default() -> Self {
        McConfig {
            kernel_samples: 10_000,
            common_samples: 10_000,
        }
    }
}

/// Provenance of a build: seed, scheme, exactness, and grid resolutions.
#[derive(Debug, Clone, PartialEq)]
pub struct BuildMeta {
    pub seed: u64,
    pub scheme: WeightScheme,
    /// True when every kernel row was expanded exactly.
    pub exact_kernel: bool,
    /// Samples per (state, action) pair; 0 in exact mode.
    pub kernel_samples: usize,
    /// Largest raw row-sum defect observed before renormalization.
    pub max_row_defect: f64,
    pub l_x: f64,
    pub l_u: f64,
}

/// A finite MDP over measure states, ready for value iteration.
#[derive(Debug, Clone)]
pub struct FiniteMeasureMDP {
    kind: MdpKind,
    beta: f64,
    states: Vec<EmpiricalMeasure>,
    index: HashMap<Vec<u32>, usize>,
    actions: Vec<Vec<MdpAction>>,
    cost: Vec<Vec<f64>>,
    kernel: Vec<Vec<Vec<(u32, f64)>>>,
    state_reps: Vec<Vec<f64>>,
    action_atoms: Vec<Vec<f64>>,
    meta: BuildMeta,
}

impl FiniteMeasureMDP {
    #[allow(clippy::too_many_arguments)]
    pub(crate) fn from_parts(
        kind: MdpKind,
        beta: f64,
        states: Vec<EmpiricalMeasure>,
        actions: Vec<Vec<MdpAction>>,
        cost: Vec<Vec<f64>>,
        kernel: Vec<Vec<Vec<(u32, f64)>>>,
        state_reps: Vec<Vec<f64>>,
        action_atoms: Vec<Vec<f64>>,
        meta: BuildMeta,
    ) -> Result<Self> {
        let n = states.len();
        if actions.len() != n || cost.len() != n || kernel.len() != n {
            return Err(Error::invalid("per-state table lengths disagree"));
        }
        for s in 0..n {
            let k = actions[s].len();
            if k == 0 {
                return Err(Error::invalid(format!("state {s} has no actions")));
            }
            if cost[s].len() != k || kernel[s].len() != k {
                return Err(Error::invalid(format!("state {s} table widths disagree")));
            }
            for (a, row) in kernel[s].iter().enumerate() {
                let sum: f64 = row.iter().map(|(_, p)| p).sum();
                let defect = (sum - 1.0).abs();
                if defect > MC_ROW_TOL {
                    return Err(Error::NonStochasticKernel {
                        state: s,
                        action: a,
                        sum,
                        defect,
                    });
                }
                if row.iter().any(|&(j, p)| j as usize >= n || !p.is_finite() || p < 0.0) {
                    return Err(Error::invalid(format!("kernel row ({s},{a}) malformed")));
                }
            }
            if cost[s].iter().any(|c| !c.is_finite()) {
                return Err(Error::invalid(format!("state {s} has non-finite cost")));
            }
        }
        let index = states
            .iter()
            .enumerate()
            .map(|(i, e)| (e.counts().to_vec(), i))
            .collect();
        Ok(FiniteMeasureMDP {
            kind,
            beta,
            states,
            index,
            actions,
            cost,
            kernel,
            state_reps,
            action_atoms,
            meta,
        })
    }

    pub fn kind(&self) -> MdpKind {
        self.kind
    }

    pub fn beta(&self) -> f64 {
        self.beta
    }

    pub fn num_states(&self) -> usize {
        self.states.len()
    }

    pub fn states(&self) -> &[EmpiricalMeasure] {
        &self.states
    }

    pub fn state(&self, s: usize) -> &EmpiricalMeasure {
        &self.states[s]
    }

    /// Index of the state with these counts, if enumerated.
    pub fn state_index(&self, counts: &[u32]) -> Option<usize> {
        self.index.get(counts).copied()
    }

    pub fn actions(&self, s: usize) -> &[MdpAction] {
        &self.actions[s]
    }

    pub fn num_actions(&self, s: usize) -> usize {
        self.actions[s].len()
    }

    pub fn action(&self, s: usize, a: usize) -> &MdpAction {
        &self.actions[s][a]
    }

    pub fn cost(&self, s: usize, a: usize) -> f64 {
        self.cost[s][a]
    }

    /// Sparse kernel row: (next-state index, probability) pairs.
    pub fn kernel_row(&self, s: usize, a: usize) -> &[(u32, f64)] {
        &self.kernel[s][a]
    }

    /// Cell representatives of the grid the MDP was built on.
    pub fn state_reps(&self) -> &[Vec<f64>] {
        &self.state_reps
    }

    /// Action atoms of the grid the MDP was built on.
    pub fn action_atoms(&self) -> &[Vec<f64>] {
        &self.action_atoms
    }

    pub fn meta(&self) -> &BuildMeta {
        &self.meta
    }

    pub(crate) fn cost_table(&self) -> &[Vec<f64>] {
        &self.cost
    }

    pub(crate) fn kernel_table(&self) -> &[Vec<Vec<(u32, f64)>>] {
        &self.kernel
    }

    /// Largest absolute cost entry.
    pub fn max_abs_cost(&self) -> f64 {
        self.cost
            .iter()
            .flatten()
            .fold(0.0, |acc, c| acc.max(c.abs()))
    }
}

/// True when the idiosyncratic noise product over `agents` can be expanded
/// exactly within [`EXACT_NOISE_CAP`].
pub fn noise_product_exact(model: &AgentModel, agents: u32) -> bool {
    match model.idio_noise().support() {
        Some(atoms) => (atoms.len() as u128)
            .checked_pow(agents)
            .is_some_and(|c| c <= EXACT_NOISE_CAP),
        None => false,
    }
}

/// Probability of drawing the count vector `counts` in `sum(counts)`
/// independent draws from `probs`.
pub fn multinomial_pmf(counts: &[u32], probs: &[f64]) -> f64 {
    debug_assert_eq!(counts.len(), probs.len());
    let mut coeff = 1.0f64;
    let mut seen = 0u32;
    let mut density = 1.0f64;
    for (&c, &p) in counts.iter().zip(probs) {
        for j in 1..=c {
            seen += 1;
            coeff *= seen as f64 / j as f64;
        }
        density *= p.powi(c as i32);
    }
    coeff * density
}

/// Sparse next-cell distribution of one agent under exact idiosyncratic
/// noise and a fixed common-noise value.
fn next_cell_dist(
    model: &AgentModel,
    grid: &StateGrid,
    x: &[f64],
    u: &[f64],
    mf: &MeanField,
    w0: f64,
) -> Result<Vec<(usize, f64)>> {
    let atoms = model
        .idio_noise()
        .support()
        .ok_or_else(|| Error::invalid("exact expansion needs finite idiosyncratic noise"))?;
    let mut dist: Vec<(usize, f64)> = Vec::with_capacity(atoms.len());
    for &(w, pw) in atoms {
        let cell = grid.quantize(&model.step(x, u, mf, w, w0))?;
        match dist.iter_mut().find(|(c, _)| *c == cell) {
            Some((_, p)) => *p += pw,
            None => dist.push((cell, pw)),
        }
    }
    Ok(dist)
}

/// As [`next_cell_dist`] but estimated from `samples` seeded noise draws.
fn next_cell_dist_mc(
    model: &AgentModel,
    grid: &StateGrid,
    x: &[f64],
    u: &[f64],
    mf: &MeanField,
    w0: f64,
    samples: usize,
    rng: &mut rand_chacha::ChaCha8Rng,
) -> Result<Vec<(usize, f64)>> {
    let mut tally = vec![0u64; grid.num_cells()];
    for _ in 0..samples {
        let w = model.idio_noise().sample(rng);
        let cell = grid.quantize(&model.step(x, u, mf, w, w0))?;
        tally[cell] += 1;
    }
    Ok(tally
        .iter()
        .enumerate()
        .filter(|&(_, &t)| t > 0)
        .map(|(c, &t)| (c, t as f64 / samples as f64))
        .collect())
}

/// Distribution of the summed count vector when `count` agents in each group
/// move independently with the group's next-cell distribution.
fn convolve_groups(
    num_cells: usize,
    groups: &[(u32, Vec<(usize, f64)>)],
) -> BTreeMap<Vec<u32>, f64> {
    let mut acc: BTreeMap<Vec<u32>, f64> = BTreeMap::new();
    acc.insert(vec![0u32; num_cells], 1.0);
    for (count, dist) in groups {
        // multinomial expansion of this group over its occupied cells
        let probs: Vec<f64> = dist.iter().map(|&(_, p)| p).collect();
        let mut expansion: Vec<(Vec<u32>, f64)> = Vec::new();
        let mut prefix = Vec::with_capacity(dist.len());
        push_compositions(*count, dist.len(), &mut prefix, &mut |split| {
            let p = multinomial_pmf(split, &probs);
            if p > 0.0 {
                let mut delta = vec![0u32; num_cells];
                for (&(cell, _), &k) in dist.iter().zip(split) {
                    delta[cell] += k;
                }
                expansion.push((delta, p));
            }
        });
        let mut next: BTreeMap<Vec<u32>, f64> = BTreeMap::new();
        for (base, p0) in &acc {
            for (delta, p1) in &expansion {
                let key: Vec<u32> = base.iter().zip(delta).map(|(a, b)| a + b).collect();
                *next.entry(key).or_insert(0.0) += p0 * p1;
            }
        }
        acc = next;
    }
    acc
}

/// One concrete population: `count` agents at position `x` taking atom `u`.
struct AgentGroup {
    count: u32,
    x: Vec<f64>,
    u: Vec<f64>,
}

/// Expands a joint measure into groups over the representative cloud, in
/// canonical (cell ascending, atom ascending) order.
fn representative_groups(
    grid: &StateGrid,
    action_grid: &ActionGrid,
    theta: &JointEmpiricalMeasure,
) -> Vec<AgentGroup> {
    let mut groups = Vec::new();
    for (cell, row) in theta.counts().iter().enumerate() {
        for (atom, &count) in row.iter().enumerate() {
            if count > 0 {
                groups.push(AgentGroup {
                    count,
                    x: grid.representative(cell).to_vec(),
                    u: action_grid.atom(atom).to_vec(),
                });
            }
        }
    }
    groups
}

fn mean_field_of_groups(groups: &[AgentGroup]) -> MeanField {
    let points: Vec<Vec<f64>> = groups.iter().map(|g| g.x.clone()).collect();
    let weights: Vec<f64> = {
        let total: u32 = groups.iter().map(|g| g.count).sum();
        groups
            .iter()
            .map(|g| g.count as f64 / total as f64)
            .collect()
    };
    MeanField::from_weighted(points, weights).expect("groups form a distribution")
}

/// Average stage cost `(1/N) sum_i c(x^i, u^i, mu)` of a concrete population.
fn group_cost(model: &AgentModel, groups: &[AgentGroup], mf: &MeanField) -> f64 {
    let total: u32 = groups.iter().map(|g| g.count).sum();
    groups
        .iter()
        .map(|g| g.count as f64 * model.cost(&g.x, &g.u, mf))
        .sum::<f64>()
        / total as f64
}

/// Dense law of the next empirical measure for a concrete population.
///
/// Exact mode enumerates idiosyncratic noise through per-group multinomial
/// convolution (equivalent to expanding the full noise product, since agents
/// are conditionally independent given the common-noise value). MC mode
/// averages `samples` full idiosyncratic draws, consumed in agent order.
fn population_kernel_row(
    model: &AgentModel,
    grid: &StateGrid,
    groups: &[AgentGroup],
    mf: &MeanField,
    index: &HashMap<Vec<u32>, usize>,
    num_states: usize,
    exact: bool,
    samples: usize,
    rng: &mut rand_chacha::ChaCha8Rng,
) -> Result<Vec<f64>> {
    let common = model
        .common_noise()
        .support()
        .ok_or_else(|| Error::invalid("population kernels need finite common noise"))?;
    let mut row = vec![0.0f64; num_states];
    let lookup = |counts: &[u32]| -> Result<usize> {
        index
            .get(counts)
            .copied()
            .ok_or_else(|| Error::UnreachableState {
                counts: counts.to_vec(),
            })
    };
    for &(w0, p0) in common {
        if p0 == 0.0 {
            continue;
        }
        if exact {
            let dists = groups
                .iter()
                .map(|g| Ok((g.count, next_cell_dist(model, grid, &g.x, &g.u, mf, w0)?)))
                .collect::<Result<Vec<_>>>()?;
            for (counts, p) in convolve_groups(grid.num_cells(), &dists) {
                row[lookup(&counts)?] += p0 * p;
            }
        } else {
            let weight = p0 / samples as f64;
            for _ in 0..samples {
                let mut counts = vec![0u32; grid.num_cells()];
                for g in groups {
                    for _ in 0..g.count {
                        let w = model.idio_noise().sample(rng);
                        counts[grid.quantize(&model.step(&g.x, &g.u, mf, w, w0))?] += 1;
                    }
                }
                row[lookup(&counts)?] += weight;
            }
        }
    }
    Ok(row)
}

/// Law of the next `N`-agent empirical measure from state `mu` under joint
/// action `theta`, as a dense vector over the canonical enumeration of the
/// `N`-agent count vectors.
///
/// Agents sit at their cell representatives. The expansion is exact when the
/// idiosyncratic noise is finite and its product over agents fits
/// [`EXACT_NOISE_CAP`]; otherwise `mc.kernel_samples` seeded draws are
/// averaged. Common noise must have finite support.
pub fn exact_measure_kernel(
    model: &AgentModel,
    grid: &StateGrid,
    action_grid: &ActionGrid,
    mu: &EmpiricalMeasure,
    theta: &JointEmpiricalMeasure,
    mc: &McConfig,
    seed: u64,
) -> Result<Vec<f64>> {
    if !theta.matches_marginal(mu) {
        return Err(Error::InvalidAction {
            marginal: theta.state_marginal(),
            expected: mu.counts().to_vec(),
        });
    }
    let states = enumerate_pn(grid.num_cells(), mu.total())?;
    let index: HashMap<Vec<u32>, usize> = states
        .iter()
        .enumerate()
        .map(|(i, e)| (e.counts().to_vec(), i))
        .collect();
    let groups = representative_groups(grid, action_grid, theta);
    let mf = mean_field_of_groups(&groups);
    let exact = noise_product_exact(model, mu.total());
    let mut rng = seeding::stream(&[seed]);
    population_kernel_row(
        model,
        grid,
        &groups,
        &mf,
        &index,
        states.len(),
        exact,
        mc.kernel_samples,
        &mut rng,
    )
}

/// Validates a raw row sum, prunes tiny entries, renormalizes, sparsifies.
fn finish_row(
    row: &[f64],
    state: usize,
    action: usize,
    exact: bool,
) -> Result<(Vec<(u32, f64)>, f64)> {
    let sum: f64 = row.iter().sum();
    let defect = (sum - 1.0).abs();
    let tol = if exact { EXACT_ROW_TOL } else { MC_ROW_TOL };
    if defect > tol {
        return Err(Error::NonStochasticKernel {
            state,
            action,
            sum,
            defect,
        });
    }
    let kept: f64 = row.iter().filter(|p| **p >= PRUNE_EPS).sum();
    let sparse = row
        .iter()
        .enumerate()
        .filter(|&(_, &p)| p >= PRUNE_EPS)
        .map(|(j, &p)| (j as u32, p / kept))
        .collect();
    Ok((sparse, defect))
}

struct RowResult {
    cost: f64,
    row: Vec<(u32, f64)>,
    defect: f64,
}

/// Builds the finite-population measure MDP: states are `N`-agent empirical
/// measures, actions are admissible joint measures, and cost/kernel entries
/// average the concrete-population law over the weight scheme.
pub fn build_finite_population_mdp(
    model: &AgentModel,
    grid: &StateGrid,
    action_grid: &ActionGrid,
    agents: u32,
    scheme: WeightScheme,
    mc: &McConfig,
    seed: u64,
) -> Result<FiniteMeasureMDP> {
    let states = enumerate_pn(grid.num_cells(), agents)?;
    let index: HashMap<Vec<u32>, usize> = states
        .iter()
        .enumerate()
        .map(|(i, e)| (e.counts().to_vec(), i))
        .collect();
    let actions: Vec<Vec<JointEmpiricalMeasure>> = states
        .iter()
        .map(|mu| admissible_actions(mu, action_grid.len(), DEFAULT_ENUMERATION_CAP))
        .collect::<Result<_>>()?;
    let exact = noise_product_exact(model, agents) && model.common_noise().is_finite();
    if !model.common_noise().is_finite() {
        return Err(Error::invalid(
            "finite-population builds need finite common noise; discretize the sampler first",
        ));
    }

    let pairs: Vec<(usize, usize)> = states
        .iter()
        .enumerate()
        .flat_map(|(s, _)| (0..actions[s].len()).map(move |a| (s, a)))
        .collect();
    let results: Result<Vec<RowResult>> = pairs
        .par_iter()
        .map(|&(s, a)| {
            let pair_seed = seeding::mix(&[seed, s as u64, a as u64]);
            compute_population_pair(
                model,
                grid,
                action_grid,
                &actions[s][a],
                &index,
                states.len(),
                scheme,
                mc,
                exact,
                pair_seed,
            )
            .map(|(cost, row, defect)| RowResult { cost, row, defect })
        })
        .collect();
    let results = results?;

    assemble(
        MdpKind::FinitePopulation { agents },
        model,
        grid,
        action_grid,
        states,
        actions
            .into_iter()
            .map(|acts| acts.into_iter().map(MdpAction::Joint).collect())
            .collect(),
        &pairs,
        results,
        scheme,
        exact,
        mc,
        seed,
    )
}

#[allow(clippy::too_many_arguments)]
fn compute_population_pair(
    model: &AgentModel,
    grid: &StateGrid,
    action_grid: &ActionGrid,
    theta: &JointEmpiricalMeasure,
    index: &HashMap<Vec<u32>, usize>,
    num_states: usize,
    scheme: WeightScheme,
    mc: &McConfig,
    exact: bool,
    pair_seed: u64,
) -> Result<(f64, Vec<(u32, f64)>, f64)> {
    let make_row = |groups: &[AgentGroup], kernel_seed: u64| -> Result<(f64, Vec<f64>)> {
        let mf = mean_field_of_groups(groups);
        let cost = group_cost(model, groups, &mf);
        let mut rng = seeding::stream(&[kernel_seed]);
        let row = population_kernel_row(
            model,
            grid,
            groups,
            &mf,
            index,
            num_states,
            exact,
            mc.kernel_samples,
            &mut rng,
        )?;
        Ok((cost, row))
    };
    match scheme {
        WeightScheme::Dirac => {
            let groups = representative_groups(grid, action_grid, theta);
            let (cost, row) = make_row(&groups, seeding::mix(&[pair_seed, 2]))?;
            let (sparse, defect) = finish_row_labeled(&row, theta, exact)?;
            Ok((cost, sparse, defect))
        }
        WeightScheme::SampledUniform { samples } => {
            if samples == 0 {
                return Err(Error::invalid("sampled weight scheme needs samples >= 1"));
            }
            let mut cloud_rng = seeding::stream(&[pair_seed, 1]);
            let mut cost_acc = 0.0;
            let mut row_acc = vec![0.0f64; num_states];
            for k in 0..samples {
                // one agent per group: positions drawn uniformly in the cell,
                // expanded in canonical (cell, atom) order
                let mut groups = Vec::new();
                for (cell, row) in theta.counts().iter().enumerate() {
                    for (atom, &count) in row.iter().enumerate() {
                        for _ in 0..count {
                            groups.push(AgentGroup {
                                count: 1,
                                x: grid.sample_in_cell(cell, &mut cloud_rng),
                                u: action_grid.atom(atom).to_vec(),
                            });
                        }
                    }
                }
                let (cost, row) = make_row(&groups, seeding::mix(&[pair_seed, 2, k as u64]))?;
                cost_acc += cost;
                for (acc, p) in row_acc.iter_mut().zip(&row) {
                    *acc += p;
                }
            }
            let inv = 1.0 / samples as f64;
            row_acc.iter_mut().for_each(|p| *p *= inv);
            let (sparse, defect) = finish_row_labeled(&row_acc, theta, exact)?;
            Ok((cost_acc * inv, sparse, defect))
        }
    }
}

/// [`finish_row`] that labels failures with the action's marginal.
fn finish_row_labeled(
    row: &[f64],
    theta: &JointEmpiricalMeasure,
    exact: bool,
) -> Result<(Vec<(u32, f64)>, f64)> {
    finish_row(row, usize::MAX, usize::MAX, exact).map_err(|e| match e {
        Error::NonStochasticKernel { sum, defect, .. } => Error::invalid(format!(
            "kernel row at marginal {:?} sums to {sum} (defect {defect})",
            theta.state_marginal()
        )),
        other => other,
    })
}

/// Pushes a simplex measure one step through the mean-field flow under a
/// fixed common-noise value and agent rule:
/// `mu'(i) = sum_{j,k} T(i | j, k, mu) gamma(k | j) mu(j)`.
///
/// Per-(cell, atom) transition rows are exact for finite idiosyncratic noise
/// and seeded Monte Carlo otherwise.
pub fn measure_flow(
    model: &AgentModel,
    grid: &StateGrid,
    action_grid: &ActionGrid,
    mu: &SimplexMeasure,
    gamma: &AgentRule,
    w0: f64,
    mc: &McConfig,
    seed: u64,
) -> Result<SimplexMeasure> {
    let m = grid.num_cells();
    if mu.support_size() != m {
        return Err(Error::SupportMismatch {
            left: mu.support_size(),
            right: m,
        });
    }
    let mf = MeanField::from_weighted(
        grid.representatives().to_vec(),
        mu.weights().to_vec(),
    )?;
    let exact = model.idio_noise().is_finite();
    let mut out = vec![0.0f64; m];
    for (j, &wj) in mu.weights().iter().enumerate() {
        if wj == 0.0 {
            continue;
        }
        for (k, &gjk) in gamma.row(j).iter().enumerate() {
            if gjk == 0.0 {
                continue;
            }
            let x = grid.representative(j);
            let u = action_grid.atom(k);
            let dist = if exact {
                next_cell_dist(model, grid, x, u, &mf, w0)?
            } else {
                let mut rng = seeding::stream(&[seed, j as u64, k as u64]);
                next_cell_dist_mc(model, grid, x, u, &mf, w0, mc.kernel_samples, &mut rng)?
            };
            for (cell, p) in dist {
                out[cell] += wj * gjk * p;
            }
        }
    }
    SimplexMeasure::new(out)
}

/// All agent rules on the `1/n` probability grid: occupied cells run through
/// every composition of `n` over the atoms; unoccupied cells are uniform.
pub fn enumerate_rules(
    mu: &EmpiricalMeasure,
    num_atoms: usize,
    cap: u128,
) -> Result<Vec<AgentRule>> {
    if num_atoms == 0 {
        return Err(Error::EmptyActionGrid);
    }
    let n = mu.total();
    let occupied: Vec<usize> = (0..mu.support_size()).filter(|&i| mu.count(i) > 0).collect();
    let per_cell = multiset_count(num_atoms, n);
    let count = occupied
        .iter()
        .fold(1u128, |acc, _| acc.saturating_mul(per_cell));
    if count > cap {
        return Err(Error::CapExceeded {
            what: format!("agent rules at counts {:?}", mu.counts()),
            count,
            cap,
        });
    }
    // per-cell menu of probability rows with denominator n
    let mut menu: Vec<Vec<f64>> = Vec::with_capacity(per_cell as usize);
    let mut prefix = Vec::with_capacity(num_atoms);
    push_compositions(n, num_atoms, &mut prefix, &mut |split| {
        menu.push(split.iter().map(|&c| c as f64 / n as f64).collect());
    });
    let uniform = vec![1.0 / num_atoms as f64; num_atoms];
    let mut out = Vec::with_capacity(count as usize);
    let mut choice = vec![0usize; occupied.len()];
    loop {
        let mut probs = vec![uniform.clone(); mu.support_size()];
        for (slot, &cell) in occupied.iter().enumerate() {
            probs[cell] = menu[choice[slot]].clone();
        }
        out.push(AgentRule::new(probs).expect("menu rows are distributions"));
        // odometer over choices, last occupied cell fastest
        let mut slot = occupied.len();
        loop {
            if slot == 0 {
                return Ok(out);
            }
            slot -= 1;
            choice[slot] += 1;
            if choice[slot] < menu.len() {
                break;
            }
            choice[slot] = 0;
        }
    }
}

/// Builds the aggregation MDP: flow per common-noise value, then project
/// back onto the `1/n` grid with the nearest-neighbor map.
pub fn build_aggregation_mdp(
    model: &AgentModel,
    grid: &StateGrid,
    action_grid: &ActionGrid,
    n: u32,
    mc: &McConfig,
    seed: u64,
) -> Result<FiniteMeasureMDP> {
    build_limit_mdp(model, grid, action_grid, n, mc, seed, false)
}

/// Builds the sampling MDP: flow per common-noise value, then the
/// multinomial law of an `n`-draw empirical measure from the flowed measure.
pub fn build_sampling_mdp(
    model: &AgentModel,
    grid: &StateGrid,
    action_grid: &ActionGrid,
    n: u32,
    mc: &McConfig,
    seed: u64,
) -> Result<FiniteMeasureMDP> {
    build_limit_mdp(model, grid, action_grid, n, mc, seed, true)
}

#[allow(clippy::too_many_arguments)]
fn build_limit_mdp(
    model: &AgentModel,
    grid: &StateGrid,
    action_grid: &ActionGrid,
    n: u32,
    mc: &McConfig,
    seed: u64,
    sampling: bool,
) -> Result<FiniteMeasureMDP> {
    let m = grid.num_cells();
    let states = enumerate_pn(m, n)?;
    let rules: Vec<Vec<AgentRule>> = states
        .iter()
        .map(|mu| enumerate_rules(mu, action_grid.len(), DEFAULT_ENUMERATION_CAP))
        .collect::<Result<_>>()?;
    let exact = model.idio_noise().is_finite() && model.common_noise().is_finite();

    let pairs: Vec<(usize, usize)> = states
        .iter()
        .enumerate()
        .flat_map(|(s, _)| (0..rules[s].len()).map(move |a| (s, a)))
        .collect();
    let results: Result<Vec<RowResult>> = pairs
        .par_iter()
        .map(|&(s, a)| {
            let pair_seed = seeding::mix(&[seed, s as u64, a as u64]);
            let mu = states[s].to_simplex();
            let gamma = &rules[s][a];
            let mf = MeanField::from_weighted(
                grid.representatives().to_vec(),
                mu.weights().to_vec(),
            )?;
            let cost: f64 = (0..m)
                .map(|j| {
                    let wj = mu.weights()[j];
                    if wj == 0.0 {
                        return 0.0;
                    }
                    gamma
                        .row(j)
                        .iter()
                        .enumerate()
                        .map(|(k, &gjk)| {
                            if gjk == 0.0 {
                                0.0
                            } else {
                                gjk * model.cost(grid.representative(j), action_grid.atom(k), &mf)
                            }
                        })
                        .sum::<f64>()
                        * wj
                })
                .sum();

            // common noise: exact atoms, or seeded draws with equal weight
            let common: Vec<(f64, f64)> = match model.common_noise().support() {
                Some(atoms) => atoms.to_vec(),
                None => {
                    let mut rng = seeding::stream(&[pair_seed, 3]);
                    let w = 1.0 / mc.common_samples as f64;
                    (0..mc.common_samples)
                        .map(|_| (model.common_noise().sample(&mut rng), w))
                        .collect()
                }
            };
            let mut row = vec![0.0f64; states.len()];
            for (w0_idx, &(w0, p0)) in common.iter().enumerate() {
                if p0 == 0.0 {
                    continue;
                }
                let nu = measure_flow(
                    model,
                    grid,
                    action_grid,
                    &mu,
                    gamma,
                    w0,
                    mc,
                    seeding::mix(&[pair_seed, 4, w0_idx as u64]),
                )?;
                if sampling {
                    for (i, st) in states.iter().enumerate() {
                        row[i] += p0 * multinomial_pmf(st.counts(), nu.weights());
                    }
                } else {
                    let (i, _) = nearest_in(&states, &nu);
                    row[i] += p0;
                }
            }
            let (sparse, defect) = finish_row(&row, s, a, exact)?;
            Ok(RowResult {
                cost,
                row: sparse,
                defect,
            })
        })
        .collect();
    let results = results?;

    assemble(
        if sampling {
            MdpKind::Sampling { n }
        } else {
            MdpKind::Aggregation { n }
        },
        model,
        grid,
        action_grid,
        states,
        rules
            .into_iter()
            .map(|rs| rs.into_iter().map(MdpAction::Rule).collect())
            .collect(),
        &pairs,
        results,
        WeightScheme::Dirac,
        exact,
        mc,
        seed,
    )
}

#[allow(clippy::too_many_arguments)]
fn assemble(
    kind: MdpKind,
    model: &AgentModel,
    grid: &StateGrid,
    action_grid: &ActionGrid,
    states: Vec<EmpiricalMeasure>,
    actions: Vec<Vec<MdpAction>>,
    pairs: &[(usize, usize)],
    results: Vec<RowResult>,
    scheme: WeightScheme,
    exact: bool,
    mc: &McConfig,
    seed: u64,
) -> Result<FiniteMeasureMDP> {
    let mut cost: Vec<Vec<f64>> = actions.iter().map(|a| vec![0.0; a.len()]).collect();
    let mut kernel: Vec<Vec<Vec<(u32, f64)>>> =
        actions.iter().map(|a| vec![Vec::new(); a.len()]).collect();
    let mut max_defect = 0.0f64;
    for (&(s, a), r) in pairs.iter().zip(results) {
        cost[s][a] = r.cost;
        kernel[s][a] = r.row;
        max_defect = max_defect.max(r.defect);
    }
    let meta = BuildMeta {
        seed,
        scheme,
        exact_kernel: exact,
        kernel_samples: if exact { 0 } else { mc.kernel_samples },
        max_row_defect: max_defect,
        l_x: grid.l_x(),
        l_u: action_grid.l_u(),
    };
    FiniteMeasureMDP::from_parts(
        kind,
        model.beta(),
        states,
        actions,
        cost,
        kernel,
        grid.representatives().to_vec(),
        action_grid.atoms().to_vec(),
        meta,
    )
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::BoxBounds;
    use crate::model::Noise;

    fn two_cell_grid() -> StateGrid {
        StateGrid::uniform(BoxBounds::interval(0.0, 1.0).unwrap(), &[2]).unwrap()
    }

    fn single_atom_actions() -> ActionGrid {
        ActionGrid::new(vec![vec![0.5]], BoxBounds::interval(0.0, 1.0).unwrap()).unwrap()
    }

    fn coin_flip_model() -> AgentModel {
        // idio atom 0 lands in cell 0, atom 1 in cell 1, fair coin
        AgentModel::builder()
            .state_bounds(BoxBounds::interval(0.0, 1.0).unwrap())
            .action_bounds(BoxBounds::interval(0.0, 1.0).unwrap())
            .dynamics(|_x, _u, _mf, w, _w0| vec![if w < 0.5 { 0.25 } else { 0.75 }])
            .stage_cost(|_, _, _| 0.0)
            .idio_noise(Noise::atoms(vec![(0.0, 0.5), (1.0, 0.5)]).unwrap())
            .common_noise(Noise::none())
            .lipschitz(0.0, 0.0)
            .beta(0.5)
            .build()
            .unwrap()
    }

    fn constant_cell_model(target: f64) -> AgentModel {
        AgentModel::builder()
            .state_bounds(BoxBounds::interval(0.0, 1.0).unwrap())
            .action_bounds(BoxBounds::interval(0.0, 1.0).unwrap())
            .dynamics(move |_x, _u, _mf, _w, _w0| vec![target])
            .stage_cost(|_, _, _| 1.0)
            .idio_noise(Noise::none())
            .common_noise(Noise::none())
            .lipschitz(0.0, 0.0)
            .beta(0.5)
            .build()
            .unwrap()
    }

    fn dirac_theta(mu: &EmpiricalMeasure, atom: usize, num_atoms: usize) -> JointEmpiricalMeasure {
        let counts = mu
            .counts()
            .iter()
            .map(|&c| {
                let mut row = vec![0u32; num_atoms];
                row[atom] = c;
                row
            })
            .collect();
        JointEmpiricalMeasure::new(counts).unwrap()
    }

    #[test]
    fn deterministic_dynamics_give_dirac_row() {
        let model = constant_cell_model(0.75);
        let grid = two_cell_grid();
        let actions = single_atom_actions();
        let mu = EmpiricalMeasure::new(vec![2, 0]).unwrap();
        let theta = dirac_theta(&mu, 0, 1);
        let row =
            exact_measure_kernel(&model, &grid, &actions, &mu, &theta, &McConfig::default(), 0)
                .unwrap();
        // P_2(2) order: (2,0), (1,1), (0,2); everyone lands in cell 1
        assert_eq!(row, vec![0.0, 0.0, 1.0]);
    }

    #[test]
    fn single_agent_coin_flip_row() {
        let model = coin_flip_model();
        let grid = two_cell_grid();
        let actions = single_atom_actions();
        let mu = EmpiricalMeasure::new(vec![1, 0]).unwrap();
        let theta = dirac_theta(&mu, 0, 1);
        let row =
            exact_measure_kernel(&model, &grid, &actions, &mu, &theta, &McConfig::default(), 0)
                .unwrap();
        assert_eq!(row, vec![0.5, 0.5]);
    }

    #[test]
    fn two_agent_coin_flips_row() {
        let model = coin_flip_model();
        let grid = two_cell_grid();
        let actions = single_atom_actions();
        let mu = EmpiricalMeasure::new(vec![2, 0]).unwrap();
        let theta = dirac_theta(&mu, 0, 1);
        let row =
            exact_measure_kernel(&model, &grid, &actions, &mu, &theta, &McConfig::default(), 0)
                .unwrap();
        assert_eq!(row, vec![0.25, 0.5, 0.25]);
    }

    #[test]
    fn marginal_mismatch_is_rejected() {
        let model = coin_flip_model();
        let grid = two_cell_grid();
        let actions = single_atom_actions();
        let mu = EmpiricalMeasure::new(vec![2, 0]).unwrap();
        let bad = JointEmpiricalMeasure::new(vec![vec![1], vec![1]]).unwrap();
        assert!(matches!(
            exact_measure_kernel(&model, &grid, &actions, &mu, &bad, &McConfig::default(), 0),
            Err(Error::InvalidAction { .. })
        ));
    }

    #[test]
    fn permutation_of_agent_identities_is_irrelevant() {
        // the kernel only sees counts, so equal-count populations with
        // different agent labellings are literally the same input; check
        // instead that group order inside theta cannot matter
        let model = coin_flip_model();
        let grid = two_cell_grid();
        let actions =
            ActionGrid::new(vec![vec![0.25], vec![0.75]], BoxBounds::interval(0.0, 1.0).unwrap())
                .unwrap();
        let mu = EmpiricalMeasure::new(vec![1, 1]).unwrap();
        let theta_a = JointEmpiricalMeasure::new(vec![vec![1, 0], vec![0, 1]]).unwrap();
        let row_a =
            exact_measure_kernel(&model, &grid, &actions, &mu, &theta_a, &McConfig::default(), 0)
                .unwrap();
        let sum: f64 = row_a.iter().sum();
        assert!((sum - 1.0).abs() < 1e-12);
        assert_eq!(row_a, vec![0.25, 0.5, 0.25]);
    }

    #[test]
    fn finite_population_build_shapes_and_rows() {
        let model = crate::registry::build("switch-2state", None).unwrap();
        let grid = crate::registry::default_grid("switch-2state", None).unwrap();
        let actions = crate::registry::default_actions("switch-2state").unwrap();
        let mdp = build_finite_population_mdp(
            &model,
            &grid,
            &actions,
            2,
            WeightScheme::Dirac,
            &McConfig::default(),
            7,
        )
        .unwrap();
        assert_eq!(mdp.num_states(), 3);
        assert_eq!(mdp.num_actions(0), 3, "counts (2,0): compositions of 2");
        assert_eq!(mdp.num_actions(1), 4, "counts (1,1): 2 atoms x 2 atoms");
        assert_eq!(mdp.num_actions(2), 3);
        assert!(mdp.meta().exact_kernel);
        for s in 0..mdp.num_states() {
            for a in 0..mdp.num_actions(s) {
                let sum: f64 = mdp.kernel_row(s, a).iter().map(|(_, p)| p).sum();
                assert!((sum - 1.0).abs() < 1e-12);
            }
        }
        // state (2,0): both agents at 0, mean 0; action "both take atom 0"
        // costs (0-0)^2 + 0.3*0 = 0
        assert_eq!(mdp.cost(0, 0), 0.0);
    }

    #[test]
    fn dirac_and_sampled_schemes_agree_on_cell_constant_model() {
        // dynamics and cost depend on x only through its cell
        let model = AgentModel::builder()
            .state_bounds(BoxBounds::interval(0.0, 1.0).unwrap())
            .action_bounds(BoxBounds::interval(0.0, 1.0).unwrap())
            .dynamics(|x, u, _mf, _w, _w0| {
                let on = x[0] >= 0.5;
                let flip = u[0] >= 0.5;
                vec![if on != flip { 0.75 } else { 0.25 }]
            })
            .stage_cost(|x, u, _mf| if x[0] >= 0.5 { 1.0 } else { 0.0 } + 0.3 * u[0])
            .idio_noise(Noise::none())
            .common_noise(Noise::none())
            .lipschitz(1.0, 2.0)
            .beta(0.4)
            .build()
            .unwrap();
        let grid = two_cell_grid();
        let actions =
            ActionGrid::new(vec![vec![0.0], vec![1.0]], BoxBounds::interval(0.0, 1.0).unwrap())
                .unwrap();
        let dirac = build_finite_population_mdp(
            &model,
            &grid,
            &actions,
            2,
            WeightScheme::Dirac,
            &McConfig::default(),
            11,
        )
        .unwrap();
        let sampled = build_finite_population_mdp(
            &model,
            &grid,
            &actions,
            2,
            WeightScheme::SampledUniform { samples: 4 },
            &McConfig::default(),
            11,
        )
        .unwrap();
        for s in 0..dirac.num_states() {
            for a in 0..dirac.num_actions(s) {
                assert!((dirac.cost(s, a) - sampled.cost(s, a)).abs() < 1e-12);
                assert_eq!(dirac.kernel_row(s, a), sampled.kernel_row(s, a));
            }
        }
    }

    #[test]
    fn rebuilds_are_identical(){
        let model = crate::registry::build("crowd-1d", None).unwrap();
        let grid = crate::registry::default_grid("crowd-1d", Some(4)).unwrap();
        let actions = crate::registry::default_actions("crowd-1d").unwrap();
        let a = build_finite_population_mdp(
            &model, &grid, &actions, 2, WeightScheme::Dirac, &McConfig::default(), 42,
        )
        .unwrap();
        let b = build_finite_population_mdp(
            &model, &grid, &actions, 2, WeightScheme::Dirac, &McConfig::default(), 42,
        )
        .unwrap();
        for s in 0..a.num_states() {
            for act in 0..a.num_actions(s) {
                assert_eq!(a.kernel_row(s, act), b.kernel_row(s, act));
                assert_eq!(a.cost(s, act), b.cost(s, act));
            }
        }
    }

    #[test]
    fn mc_kernel_is_deterministic_and_stochastic() {
        // sampler noise forces the Monte Carlo path
        let model = AgentModel::builder()
            .state_bounds(BoxBounds::interval(0.0, 1.0).unwrap())
            .action_bounds(BoxBounds::interval(0.0, 1.0).unwrap())
            .dynamics(|_x, _u, _mf, w, _w0| vec![w])
            .stage_cost(|_, _, _| 1.0)
            .idio_noise(Noise::sampler(|rng| {
                use rand::Rng;
                rng.random::<f64>()
            }))
            .common_noise(Noise::none())
            .lipschitz(0.0, 0.0)
            .beta(0.5)
            .build()
            .unwrap();
        let grid = two_cell_grid();
        let actions = single_atom_actions();
        let mc = McConfig {
            kernel_samples: 2000,
            common_samples: 1,
        };
        let a = build_finite_population_mdp(
            &model, &grid, &actions, 1, WeightScheme::Dirac, &mc, 5,
        )
        .unwrap();
        let b = build_finite_population_mdp(
            &model, &grid, &actions, 1, WeightScheme::Dirac, &mc, 5,
        )
        .unwrap();
        assert!(!a.meta().exact_kernel);
        for s in 0..a.num_states() {
            let row = a.kernel_row(s, 0);
            let sum: f64 = row.iter().map(|(_, p)| p).sum();
            assert!((sum - 1.0).abs() < 1e-9);
            assert_eq!(row, b.kernel_row(s, 0));
            // roughly a fair split between both cells
            assert!(row.iter().all(|&(_, p)| p > 0.4 && p < 0.6));
        }
    }

    #[test]
    fn measure_flow_examples() {
        let grid = two_cell_grid();
        let actions = single_atom_actions();
        let mc = McConfig::default();
        let uniform_rule = AgentRule::uniform(2, 1);

        // everything lands in cell 0
        let sink = constant_cell_model(0.25);
        let mu = SimplexMeasure::new(vec![0.3, 0.7]).unwrap();
        let out = measure_flow(&sink, &grid, &actions, &mu, &uniform_rule, 0.0, &mc, 0).unwrap();
        assert_eq!(out.weights(), &[1.0, 0.0]);

        // identity per cell holds any measure fixed
        let identity = AgentModel::builder()
            .state_bounds(BoxBounds::interval(0.0, 1.0).unwrap())
            .action_bounds(BoxBounds::interval(0.0, 1.0).unwrap())
            .dynamics(|x, _u, _mf, _w, _w0| vec![x[0]])
            .stage_cost(|_, _, _| 0.0)
            .idio_noise(Noise::none())
            .common_noise(Noise::none())
            .lipschitz(1.0, 0.0)
            .beta(0.5)
            .build()
            .unwrap();
        let out =
            measure_flow(&identity, &grid, &actions, &mu, &uniform_rule, 0.0, &mc, 0).unwrap();
        assert_eq!(out.weights(), &[0.3, 0.7]);

        // coin-flip rows mix any measure to (0.5, 0.5)
        let coin = coin_flip_model();
        let out = measure_flow(&coin, &grid, &actions, &mu, &uniform_rule, 0.0, &mc, 0).unwrap();
        assert_eq!(out.weights(), &[0.5, 0.5]);
    }

    #[test]
    fn enumerate_rules_counts_and_rows() {
        let mu = EmpiricalMeasure::new(vec![2, 0]).unwrap();
        let rules = enumerate_rules(&mu, 2, DEFAULT_ENUMERATION_CAP).unwrap();
        assert_eq!(rules.len(), 3, "compositions of 2 into 2 atoms");
        assert_eq!(rules[0].row(0), &[1.0, 0.0]);
        assert_eq!(rules[1].row(0), &[0.5, 0.5]);
        assert_eq!(rules[2].row(0), &[0.0, 1.0]);
        for r in &rules {
            assert_eq!(r.row(1), &[0.5, 0.5], "unoccupied cell stays uniform");
        }
        // two occupied cells, full 1/2-grid menu per cell
        let mu = EmpiricalMeasure::new(vec![1, 1]).unwrap();
        let rules = enumerate_rules(&mu, 2, 1 << 20).unwrap();
        assert_eq!(rules.len(), 9);
        // last cell varies fastest through its menu
        assert_eq!(rules[0].row(0), &[1.0, 0.0]);
        assert_eq!(rules[0].row(1), &[1.0, 0.0]);
        assert_eq!(rules[1].row(0), &[1.0, 0.0]);
        assert_eq!(rules[1].row(1), &[0.5, 0.5]);
        assert_eq!(rules[8].row(0), &[0.0, 1.0]);
        assert_eq!(rules[8].row(1), &[0.0, 1.0]);
    }

    #[test]
    fn aggregation_rows_are_dirac_without_common_noise() {
        let model = coin_flip_model();
        let grid = two_cell_grid();
        let actions = single_atom_actions();
        let mdp =
            build_aggregation_mdp(&model, &grid, &actions, 2, &McConfig::default(), 3).unwrap();
        assert_eq!(mdp.num_states(), 3);
        for s in 0..mdp.num_states() {
            for a in 0..mdp.num_actions(s) {
                let row = mdp.kernel_row(s, a);
                assert_eq!(row.len(), 1);
                // flow is (0.5, 0.5), already 2-empirical: counts (1,1)
                assert_eq!(row[0].0, 1);
                assert_eq!(row[0].1, 1.0);
            }
        }
    }

    #[test]
    fn aggregation_splits_over_common_atoms() {
        // common noise routes everyone to cell 0 or cell 1
        let model = AgentModel::builder()
            .state_bounds(BoxBounds::interval(0.0, 1.0).unwrap())
            .action_bounds(BoxBounds::interval(0.0, 1.0).unwrap())
            .dynamics(|_x, _u, _mf, _w, w0| vec![if w0 < 0.5 { 0.25 } else { 0.75 }])
            .stage_cost(|_, _, _| 0.0)
            .idio_noise(Noise::none())
            .common_noise(Noise::atoms(vec![(0.0, 0.5), (1.0, 0.5)]).unwrap())
            .lipschitz(0.0, 0.0)
            .beta(0.5)
            .build()
            .unwrap();
        let grid = two_cell_grid();
        let actions = single_atom_actions();
        let mdp =
            build_aggregation_mdp(&model, &grid, &actions, 2, &McConfig::default(), 3).unwrap();
        for s in 0..mdp.num_states() {
            let row = mdp.kernel_row(s, 0);
            // Dirac images (2,0) and (0,2) are state indices 0 and 2
            assert_eq!(row, &[(0u32, 0.5), (2u32, 0.5)]);
        }
    }

    #[test]
    fn sampling_row_is_multinomial() {
        let model = coin_flip_model();
        let grid = two_cell_grid();
        let actions = single_atom_actions();
        let mdp =
            build_sampling_mdp(&model, &grid, &actions, 2, &McConfig::default(), 3).unwrap();
        for s in 0..mdp.num_states() {
            for a in 0..mdp.num_actions(s) {
                assert_eq!(
                    mdp.kernel_row(s, a),
                    &[(0u32, 0.25), (1u32, 0.5), (2u32, 0.25)]
                );
            }
        }
    }

    #[test]
    fn sampling_with_one_draw_reproduces_flow() {
        let model = coin_flip_model();
        let grid = two_cell_grid();
        let actions = single_atom_actions();
        let mdp =
            build_sampling_mdp(&model, &grid, &actions, 1, &McConfig::default(), 3).unwrap();
        // states (1,0), (0,1); flow = (0.5, 0.5)
        for s in 0..mdp.num_states() {
            assert_eq!(mdp.kernel_row(s, 0), &[(0u32, 0.5), (1u32, 0.5)]);
        }
    }

    #[test]
    fn sampling_dirac_flow_hits_full_count() {
        let model = constant_cell_model(0.25);
        let grid = two_cell_grid();
        let actions = single_atom_actions();
        let mdp =
            build_sampling_mdp(&model, &grid, &actions, 3, &McConfig::default(), 3).unwrap();
        // flow is a Dirac at cell 0: all mass on counts (3,0) = state 0
        for s in 0..mdp.num_states() {
            assert_eq!(mdp.kernel_row(s, 0), &[(0u32, 1.0)]);
        }
    }

    #[test]
    fn multinomial_pmf_examples() {
        assert_eq!(multinomial_pmf(&[2, 0], &[0.5, 0.5]), 0.25);
        assert_eq!(multinomial_pmf(&[1, 1], &[0.5, 0.5]), 0.5);
        assert_eq!(multinomial_pmf(&[0, 3], &[0.0, 1.0]), 1.0);
        assert_eq!(multinomial_pmf(&[1, 2], &[1.0, 0.0]), 0.0);
        // sums to one over all count vectors
        let states = enumerate_pn(3, 4).unwrap();
        let probs = [0.2, 0.5, 0.3];
        let total: f64 = states
            .iter()
            .map(|s| multinomial_pmf(s.counts(), &probs))
            .sum();
        assert!((total - 1.0).abs() < 1e-12);
    }

    #[test]
    fn convolution_matches_naive_noise_enumeration() {
        // three agents, three-atom idiosyncratic noise: enumerate all 27
        // noise vectors directly and compare
        let model = AgentModel::builder()
            .state_bounds(BoxBounds::interval(0.0, 1.0).unwrap())
            .action_bounds(BoxBounds::interval(0.0, 1.0).unwrap())
            .dynamics(|x, _u, _mf, w, _w0| vec![(x[0] + w).clamp(0.0, 1.0)])
            .stage_cost(|_, _, _| 0.0)
            .idio_noise(Noise::atoms(vec![(-0.3, 0.25), (0.0, 0.5), (0.3, 0.25)]).unwrap())
            .common_noise(Noise::none())
            .lipschitz(1.0, 0.0)
            .beta(0.5)
            .build()
            .unwrap();
        let grid = StateGrid::uniform(BoxBounds::interval(0.0, 1.0).unwrap(), &[3]).unwrap();
        let actions = single_atom_actions();
        let mu = EmpiricalMeasure::new(vec![2, 1, 0]).unwrap();
        let theta = dirac_theta(&mu, 0, 1);
        let row =
            exact_measure_kernel(&model, &grid, &actions, &mu, &theta, &McConfig::default(), 0)
                .unwrap();

        let states = enumerate_pn(3, 3).unwrap();
        let atoms = [(-0.3, 0.25), (0.0, 0.5), (0.3, 0.25)];
        let cloud = [
            grid.representative(0).to_vec(),
            grid.representative(0).to_vec(),
            grid.representative(1).to_vec(),
        ];
        let mf = MeanField::from_cloud(&cloud);
        let mut naive = vec![0.0f64; states.len()];
        for a in 0..3 {
            for b in 0..3 {
                for c in 0..3 {
                    let picks = [atoms[a], atoms[b], atoms[c]];
                    let p: f64 = picks.iter().map(|&(_, pw)| pw).product();
                    let mut counts = vec![0u32; 3];
                    for (agent, &(w, _)) in picks.iter().enumerate() {
                        let nx = model.step(&cloud[agent], &[0.5], &mf, w, 0.0);
                        counts[grid.quantize(&nx).unwrap()] += 1;
                    }
                    let idx = states.iter().position(|s| s.counts() == counts).unwrap();
                    naive[idx] += p;
                }
            }
        }
        for (got, want) in row.iter().zip(&naive) {
            assert!((got - want).abs() < 1e-12, "{row:?} vs {naive:?}");
        }
    }
}
