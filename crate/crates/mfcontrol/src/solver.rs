//! Value iteration, policy evaluation, and agent-policy extraction.
//!
//! The solver is deterministic and synchronous: every sweep applies the
//! Bellman operator to an immutable snapshot of the previous iterate
//! (parallelized across states), so results are independent of thread
//! count. The sup-norm gap between consecutive iterates contracts by at
//! least the discount factor each sweep; the recorded [`SolveResult::
//! gap_history`] exposes that ratio for external checks.

use crate::error::Error;
use crate::mdp::{FiniteMeasureMDP, MdpAction};
use crate::measures::{disintegrate, AgentRule, EmpiricalMeasure};
use crate::Result;
use rayon::prelude::*;
use std::collections::HashMap;

/// Outcome of a value-iteration solve.
#[derive(Debug, Clone)]
pub struct SolveResult {
    /// Optimal values per state.
    pub values: Vec<f64>,
    /// Chosen action index per state (argmin, lowest index on ties).
    pub policy: Vec<usize>,
    /// Bellman sweeps performed.
    pub iterations: usize,
    /// False when `max_iter` hit before the stopping rule.
    pub converged: bool,
    /// Sup-norm update gap after each sweep.
    pub gap_history: Vec<f64>,
}

fn check_rows(kernel: &[Vec<Vec<(u32, f64)>>]) -> Result<()> {
    for (s, rows) in kernel.iter().enumerate() {
        for (a, row) in rows.iter().enumerate() {
            let sum: f64 = row.iter().map(|(_, p)| p).sum();
            let defect = (sum - 1.0).abs();
            if defect > 1e-9 {
                return Err(Error::NonStochasticKernel {
                    state: s,
                    action: a,
                    sum,
                    defect,
                });
            }
        }
    }
    Ok(())
}

fn q_value(cost: f64, row: &[(u32, f64)], beta: f64, v: &[f64]) -> f64 {
    cost + beta * row.iter().map(|&(j, p)| p * v[j as usize]).sum::<f64>()
}

/// Value iteration on raw per-state tables; the engine under
/// [`value_iteration`] and the brute-force oracle.
///
/// Sweeps start from the zero vector and stop once the sup-norm update gap
/// drops to `tol * (1 - beta) / beta`, which bounds the distance to the
/// fixed point by `tol`.
pub fn value_iteration_tables(
    cost: &[Vec<f64>],
    kernel: &[Vec<Vec<(u32, f64)>>],
    beta: f64,
    tol: f64,
    max_iter: usize,
) -> Result<SolveResult> {
    if tol <= 0.0 {
        return Err(Error::invalid("tolerance must be positive"));
    }
    if cost.len() != kernel.len() {
        return Err(Error::SizeMismatch {
            left: cost.len(),
            right: kernel.len(),
        });
    }
    check_rows(kernel)?;
    let n = cost.len();
    let threshold = tol * (1.0 - beta) / beta;
    let mut v = vec![0.0f64; n];
    let mut gap_history = Vec::new();
    let mut converged = false;
    let mut iterations = 0;
    while iterations < max_iter {
        let next: Vec<f64> = (0..n)
            .into_par_iter()
            .map(|s| {
                cost[s]
                    .iter()
                    .zip(&kernel[s])
                    .map(|(&c, row)| q_value(c, row, beta, &v))
                    .fold(f64::INFINITY, f64::min)
            })
            .collect();
        let gap = v
            .iter()
            .zip(&next)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max);
        if let Some(&prev) = gap_history.last() {
            // float slack scales with the value magnitude: near the rounding
            // floor the exact-arithmetic contraction cannot be observed
            let v_inf = next.iter().fold(0.0f64, |m, x| m.max(x.abs()));
            debug_assert!(
                gap <= beta * prev + 1e-13 * (1.0 + v_inf),
                "sweep gap failed to contract: {gap} after {prev}"
            );
        }
        gap_history.push(gap);
        v = next;
        iterations += 1;
        if gap <= threshold {
            converged = true;
            break;
        }
    }
    let policy: Vec<usize> = (0..n)
        .into_par_iter()
        .map(|s| {
            let mut best = (0usize, f64::INFINITY);
            for (a, (&c, row)) in cost[s].iter().zip(&kernel[s]).enumerate() {
                let q = q_value(c, row, beta, &v);
                if q < best.1 {
                    best = (a, q);
                }
            }
            best.0
        })
        .collect();
    Ok(SolveResult {
        values: v,
        policy,
        iterations,
        converged,
        gap_history,
    })
}

/// Solves a measure MDP to within `tol` of its optimal values.
pub fn value_iteration(
    mdp: &FiniteMeasureMDP,
    tol: f64,
    max_iter: usize,
) -> Result<SolveResult> {
    value_iteration_tables(mdp.cost_table(), mdp.kernel_table(), mdp.beta(), tol, max_iter)
}

/// Fixed point of one policy's Bellman operator on raw tables.
pub fn policy_evaluation_tables(
    cost: &[Vec<f64>],
    kernel: &[Vec<Vec<(u32, f64)>>],
    beta: f64,
    policy: &[usize],
    tol: f64,
    max_iter: usize,
) -> Result<Vec<f64>> {
    if policy.len() != cost.len() {
        return Err(Error::SizeMismatch {
            left: policy.len(),
            right: cost.len(),
        });
    }
    for (s, &a) in policy.iter().enumerate() {
        if a >= cost[s].len() {
            return Err(Error::invalid(format!(
                "policy chooses action {a} at state {s} with only {} actions",
                cost[s].len()
            )));
        }
    }
    check_rows(kernel)?;
    let n = cost.len();
    let threshold = tol * (1.0 - beta) / beta;
    let mut v = vec![0.0f64; n];
    for _ in 0..max_iter {
        let next: Vec<f64> = (0..n)
            .into_par_iter()
            .map(|s| q_value(cost[s][policy[s]], &kernel[s][policy[s]], beta, &v))
            .collect();
        let gap = v
            .iter()
            .zip(&next)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max);
        v = next;
        if gap <= threshold {
            return Ok(v);
        }
    }
    Ok(v)
}

/// Evaluates a fixed policy of a measure MDP to within `tol`.
pub fn policy_evaluation(
    mdp: &FiniteMeasureMDP,
    policy: &[usize],
    tol: f64,
    max_iter: usize,
) -> Result<Vec<f64>> {
    policy_evaluation_tables(
        mdp.cost_table(),
        mdp.kernel_table(),
        mdp.beta(),
        policy,
        tol,
        max_iter,
    )
}

/// A symmetric agent-level policy: one randomized rule per measure state.
///
/// Keyed by the state's count vector so simulators can look rules up from a
/// projected feedback measure. A policy may instead carry a single fallback
/// rule applied at every feedback state (see [`AgentPolicy::constant`]).
#[derive(Debug, Clone)]
pub struct AgentPolicy {
    states: Vec<EmpiricalMeasure>,
    index: HashMap<Vec<u32>, usize>,
    rules: Vec<AgentRule>,
    fallback: Option<AgentRule>,
    cells: usize,
    atoms: Vec<Vec<f64>>,
}

impl AgentPolicy {
    /// Policy applying the same rule at every feedback state.
    pub fn constant(cells: usize, atoms: Vec<Vec<f64>>, rule: AgentRule) -> Result<Self> {
        if rule.num_cells() != cells || rule.num_atoms() != atoms.len() {
            return Err(Error::invalid("rule shape must match cells and atoms"));
        }
        Ok(AgentPolicy {
            states: Vec::new(),
            index: HashMap::new(),
            rules: Vec::new(),
            fallback: Some(rule),
            cells,
            atoms,
        })
    }

    /// Measure states the policy is defined on (empty for constant policies).
    pub fn states(&self) -> &[EmpiricalMeasure] {
        &self.states
    }

    pub fn rule(&self, state: usize) -> &AgentRule {
        &self.rules[state]
    }

    /// Rule at the feedback state with these counts.
    pub fn rule_for_counts(&self, counts: &[u32]) -> Result<&AgentRule> {
        if let Some(&i) = self.index.get(counts) {
            return Ok(&self.rules[i]);
        }
        self.fallback
            .as_ref()
            .ok_or_else(|| Error::UnreachableState {
                counts: counts.to_vec(),
            })
    }

    /// Rule for an arbitrary feedback measure: an exact counts hit when the
    /// totals line up, otherwise the nearest stored state in `w1_discrete`
    /// on cell weights (lowest index on ties), otherwise the fallback.
    ///
    /// This is what keeps a policy usable when the live population size
    /// differs from the one it was solved for.
    pub fn rule_for_measure(&self, counts: &[u32]) -> Result<&AgentRule> {
        if let Some(&i) = self.index.get(counts) {
            return Ok(&self.rules[i]);
        }
        if !self.states.is_empty() {
            let mu = EmpiricalMeasure::new(counts.to_vec())?.to_simplex();
            let (i, _) = crate::measures::nearest_in(&self.states, &mu);
            return Ok(&self.rules[i]);
        }
        self.fallback
            .as_ref()
            .ok_or_else(|| Error::UnreachableState {
                counts: counts.to_vec(),
            })
    }

    pub fn num_cells(&self) -> usize {
        self.cells
    }

    pub fn atoms(&self) -> &[Vec<f64>] {
        &self.atoms
    }

    /// Rule applied when a feedback state is not listed, if any.
    pub fn fallback(&self) -> Option<&AgentRule> {
        self.fallback.as_ref()
    }

    pub(crate) fn from_parts(
        states: Vec<EmpiricalMeasure>,
        rules: Vec<AgentRule>,
        fallback: Option<AgentRule>,
        cells: usize,
        atoms: Vec<Vec<f64>>,
    ) -> Result<Self> {
        if states.len() != rules.len() {
            return Err(Error::SizeMismatch {
                left: states.len(),
                right: rules.len(),
            });
        }
        if atoms.is_empty() || cells == 0 {
            return Err(Error::invalid("policy needs cells and action atoms"));
        }
        for rule in rules.iter().chain(&fallback) {
            if rule.num_cells() != cells || rule.num_atoms() != atoms.len() {
                return Err(Error::invalid("rule shape must match cells and atoms"));
            }
        }
        let mut index = HashMap::new();
        for (i, e) in states.iter().enumerate() {
            if e.counts().len() != cells {
                return Err(Error::SupportMismatch {
                    left: e.counts().len(),
                    right: cells,
                });
            }
            if index.insert(e.counts().to_vec(), i).is_some() {
                return Err(Error::invalid("duplicate policy state"));
            }
        }
        Ok(AgentPolicy {
            states,
            index,
            rules,
            fallback,
            cells,
            atoms,
        })
    }
}

/// Extracts the symmetric agent policy from a solved measure policy:
/// chosen joint measures are disintegrated into conditional rules, chosen
/// agent rules pass through unchanged.
pub fn to_agent_policy(mdp: &FiniteMeasureMDP, policy: &[usize]) -> Result<AgentPolicy> {
    if policy.len() != mdp.num_states() {
        return Err(Error::SizeMismatch {
            left: policy.len(),
            right: mdp.num_states(),
        });
    }
    let rules: Vec<AgentRule> = policy
        .iter()
        .enumerate()
        .map(|(s, &a)| match mdp.action(s, a) {
            MdpAction::Joint(theta) => disintegrate(theta),
            MdpAction::Rule(rule) => rule.clone(),
        })
        .collect();
    let states = mdp.states().to_vec();
    let index = states
        .iter()
        .enumerate()
        .map(|(i, e)| (e.counts().to_vec(), i))
        .collect();
    Ok(AgentPolicy {
        states,
        index,
        rules,
        fallback: None,
        cells: mdp.state_reps().len(),
        atoms: mdp.action_atoms().to_vec(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::{ActionGrid, BoxBounds, StateGrid};
    use crate::mdp::{
        build_finite_population_mdp, BuildMeta, McConfig, MdpKind, WeightScheme,
    };
    use crate::measures::JointEmpiricalMeasure;

    fn toy_mdp(
        cost: Vec<Vec<f64>>,
        kernel: Vec<Vec<Vec<(u32, f64)>>>,
        beta: f64,
    ) -> FiniteMeasureMDP {
        let n = cost.len();
        let states: Vec<EmpiricalMeasure> = (0..n)
            .map(|i| EmpiricalMeasure::dirac(n, i, 1))
            .collect();
        let actions: Vec<Vec<MdpAction>> = cost
            .iter()
            .map(|row| {
                (0..row.len())
                    .map(|_| MdpAction::Rule(AgentRule::uniform(n, 1)))
                    .collect()
            })
            .collect();
        FiniteMeasureMDP::from_parts(
            MdpKind::Aggregation { n: 1 },
            beta,
            states,
            actions,
            cost,
            kernel,
            (0..n).map(|i| vec![i as f64]).collect(),
            vec![vec![0.0]],
            BuildMeta {
                seed: 0,
                scheme: WeightScheme::Dirac,
                exact_kernel: true,
                kernel_samples: 0,
                max_row_defect: 0.0,
                l_x: 1.0,
                l_u: 0.0,
            },
        )
        .unwrap()
    }

    #[test]
    fn single_state_geometric_series() {
        let mdp = toy_mdp(vec![vec![1.0]], vec![vec![vec![(0, 1.0)]]], 0.5);
        let sol = value_iteration(&mdp, 1e-9, 10_000).unwrap();
        assert!(sol.converged);
        assert!((sol.values[0] - 2.0).abs() < 1e-8);
    }

    #[test]
    fn identity_kernel_two_states() {
        let mdp = toy_mdp(
            vec![vec![0.0], vec![1.0]],
            vec![vec![vec![(0, 1.0)]], vec![vec![(1, 1.0)]]],
            0.5,
        );
        let sol = value_iteration(&mdp, 1e-9, 10_000).unwrap();
        assert!(sol.values[0].abs() < 1e-8);
        assert!((sol.values[1] - 2.0).abs() < 1e-8);
    }

    #[test]
    fn sweep_count_obeys_contraction_bound() {
        // unit costs, beta = 0.5, tol = 1e-6: at most 21 sweeps
        let mdp = toy_mdp(vec![vec![1.0]], vec![vec![vec![(0, 1.0)]]], 0.5);
        let sol = value_iteration(&mdp, 1e-6, 10_000).unwrap();
        assert!(sol.converged);
        assert!(sol.iterations <= 21, "took {}", sol.iterations);
    }

    #[test]
    fn gap_ratios_bounded_by_beta() {
        let mdp = toy_mdp(
            vec![vec![1.0, 0.3], vec![0.2]],
            vec![
                vec![vec![(0, 0.5), (1, 0.5)], vec![(1, 1.0)]],
                vec![vec![(0, 1.0)]],
            ],
            0.7,
        );
        // gaps stay above the rounding floor at this tolerance, so the
        // exact contraction factor is observable
        let sol = value_iteration(&mdp, 1e-2, 10_000).unwrap();
        assert!(sol.gap_history.len() > 3);
        for w in sol.gap_history.windows(2) {
            if w[0] > 0.0 {
                assert!(w[1] / w[0] <= 0.7 + 1e-12, "{:?}", w);
            }
        }
        // a tight solve keeps contracting up to float noise in the values
        let sol = value_iteration(&mdp, 1e-10, 10_000).unwrap();
        let v_inf = sol.values.iter().fold(0.0f64, |m, x| m.max(x.abs()));
        for w in sol.gap_history.windows(2) {
            assert!(w[1] <= 0.7 * w[0] + 1e-13 * (1.0 + v_inf), "{:?}", w);
        }
    }

    #[test]
    fn values_bounded_by_cost_range() {
        let mdp = toy_mdp(
            vec![vec![0.25, 2.0], vec![1.5]],
            vec![
                vec![vec![(1, 1.0)], vec![(0, 1.0)]],
                vec![vec![(0, 0.5), (1, 0.5)]],
            ],
            0.6,
        );
        let sol = value_iteration(&mdp, 1e-9, 10_000).unwrap();
        for &v in &sol.values {
            assert!(v >= 0.25 / 0.4 - 1e-9 && v <= 2.0 / 0.4 + 1e-9);
        }
    }

    #[test]
    fn tie_break_picks_lowest_action() {
        let mdp = toy_mdp(
            vec![vec![1.0, 1.0]],
            vec![vec![vec![(0, 1.0)], vec![(0, 1.0)]]],
            0.5,
        );
        let sol = value_iteration(&mdp, 1e-9, 10_000).unwrap();
        assert_eq!(sol.policy, vec![0]);
    }

    #[test]
    fn policy_evaluation_consistent_with_solve() {
        let mdp = toy_mdp(
            vec![vec![1.0, 0.3], vec![0.2, 0.9]],
            vec![
                vec![vec![(0, 0.5), (1, 0.5)], vec![(1, 1.0)]],
                vec![vec![(0, 1.0)], vec![(1, 1.0)]],
            ],
            0.5,
        );
        let sol = value_iteration(&mdp, 1e-8, 10_000).unwrap();
        let eval = policy_evaluation(&mdp, &sol.policy, 1e-8, 10_000).unwrap();
        for (a, b) in sol.values.iter().zip(&eval) {
            assert!((a - b).abs() <= 2e-8, "{a} vs {b}");
        }
    }

    #[test]
    fn worse_forced_action_raises_value() {
        let mdp = toy_mdp(
            vec![vec![0.0, 1.0], vec![0.0]],
            vec![
                vec![vec![(1, 1.0)], vec![(1, 1.0)]],
                vec![vec![(1, 1.0)]],
            ],
            0.5,
        );
        let sol = value_iteration(&mdp, 1e-9, 10_000).unwrap();
        let worse = policy_evaluation(&mdp, &[1, 0], 1e-9, 10_000).unwrap();
        assert!(worse[0] > sol.values[0] + 0.9);
    }

    #[test]
    fn uniform_cost_gives_constant_values_under_any_policy() {
        let mdp = toy_mdp(
            vec![vec![1.0, 1.0], vec![1.0, 1.0]],
            vec![
                vec![vec![(0, 1.0)], vec![(1, 1.0)]],
                vec![vec![(0, 0.3), (1, 0.7)], vec![(0, 1.0)]],
            ],
            0.5,
        );
        for policy in [[0usize, 0], [1, 1], [0, 1]] {
            let v = policy_evaluation(&mdp, &policy, 1e-10, 10_000).unwrap();
            for &x in &v {
                assert!((x - 2.0).abs() < 1e-8);
            }
        }
    }

    #[test]
    fn agent_policy_disintegrates_joint_choices() {
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
        let sol = value_iteration(&mdp, 1e-8, 10_000).unwrap();
        let policy = to_agent_policy(&mdp, &sol.policy).unwrap();
        for (s, state) in mdp.states().iter().enumerate() {
            let rule = policy.rule_for_counts(state.counts()).unwrap();
            let chosen = match mdp.action(s, sol.policy[s]) {
                MdpAction::Joint(theta) => theta,
                MdpAction::Rule(_) => unreachable!("finite-population actions are joint"),
            };
            // occupied rows reproduce the chosen joint measure's ratios
            for (cell, row) in chosen.counts().iter().enumerate() {
                let rowsum: u32 = row.iter().sum();
                if rowsum > 0 {
                    for (k, &c) in row.iter().enumerate() {
                        assert!(
                            (rule.row(cell)[k] - c as f64 / rowsum as f64).abs() < 1e-12
                        );
                    }
                }
            }
        }
    }

    #[test]
    fn agent_policy_passes_rules_through() {
        let model = crate::registry::build("switch-2state", None).unwrap();
        let grid = crate::registry::default_grid("switch-2state", None).unwrap();
        let actions = crate::registry::default_actions("switch-2state").unwrap();
        let mdp =
            crate::mdp::build_aggregation_mdp(&model, &grid, &actions, 2, &McConfig::default(), 7)
                .unwrap();
        let sol = value_iteration(&mdp, 1e-8, 10_000).unwrap();
        let policy = to_agent_policy(&mdp, &sol.policy).unwrap();
        for (s, state) in mdp.states().iter().enumerate() {
            match mdp.action(s, sol.policy[s]) {
                MdpAction::Rule(rule) => {
                    assert_eq!(policy.rule_for_counts(state.counts()).unwrap(), rule);
                }
                MdpAction::Joint(_) => unreachable!("aggregation actions are rules"),
            }
        }
    }

    #[test]
    fn constant_policy_covers_everything() {
        let rule = AgentRule::uniform(2, 3);
        let policy = AgentPolicy::constant(
            2,
            vec![vec![-1.0], vec![0.0], vec![1.0]],
            rule.clone(),
        )
        .unwrap();
        assert_eq!(policy.rule_for_counts(&[5, 0]).unwrap(), &rule);
        assert_eq!(policy.rule_for_counts(&[0, 1]).unwrap(), &rule);
    }

    #[test]
    fn missing_state_is_reported() {
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
        let sol = value_iteration(&mdp, 1e-8, 10_000).unwrap();
        let policy = to_agent_policy(&mdp, &sol.policy).unwrap();
        assert!(matches!(
            policy.rule_for_counts(&[3, 0]),
            Err(Error::UnreachableState { .. })
        ));
    }

    #[test]
    fn oracle_grade_tables_roundtrip() {
        // value_iteration_tables and the mdp wrapper agree on the same data
        let cost = vec![vec![1.0, 0.5], vec![0.0]];
        let kernel = vec![
            vec![vec![(0u32, 1.0)], vec![(1u32, 1.0)]],
            vec![vec![(1u32, 1.0)]],
        ];
        let direct = value_iteration_tables(&cost, &kernel, 0.5, 1e-9, 10_000).unwrap();
        let mdp = toy_mdp(cost, kernel, 0.5);
        let wrapped = value_iteration(&mdp, 1e-9, 10_000).unwrap();
        assert_eq!(direct.values, wrapped.values);
        assert_eq!(direct.policy, wrapped.policy);
    }

    #[test]
    fn grid_and_atoms_survive_extraction() {
        let grid = StateGrid::uniform(BoxBounds::interval(0.0, 1.0).unwrap(), &[2]).unwrap();
        let actions =
            ActionGrid::new(vec![vec![0.0], vec![1.0]], BoxBounds::interval(0.0, 1.0).unwrap())
                .unwrap();
        let model = crate::registry::build("switch-2state", None).unwrap();
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
        let sol = value_iteration(&mdp, 1e-8, 10_000).unwrap();
        let policy = to_agent_policy(&mdp, &sol.policy).unwrap();
        assert_eq!(policy.num_cells(), 2);
        assert_eq!(policy.atoms(), actions.atoms());
        let _ = JointEmpiricalMeasure::new(vec![vec![1, 0], vec![0, 1]]).unwrap();
    }

    #[test]
    fn measure_lookup_matches_nearest_state_across_totals() {
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
        let sol = value_iteration(&mdp, 1e-8, 10_000).unwrap();
        let policy = to_agent_policy(&mdp, &sol.policy).unwrap();

        // matching total: exact lookup and measure lookup agree
        for state in policy.states() {
            let exact = policy.rule_for_counts(state.counts()).unwrap().probs();
            let near = policy.rule_for_measure(state.counts()).unwrap().probs();
            assert_eq!(exact, near);
        }

        // different total: exact lookup fails, measure lookup lands on the
        // nearest stored state ((5,1)/6 is closest to (2,0)/2)
        assert!(policy.rule_for_counts(&[5, 1]).is_err());
        let near = policy.rule_for_measure(&[5, 1]).unwrap();
        assert_eq!(near.probs(), policy.rule_for_counts(&[2, 0]).unwrap().probs());
    }
}
