//! Measures over finite supports and the distances between them.
//!
//! Three views of an agent population are used throughout:
//!
//! - [`PointCloudMeasure`]: the raw cloud `{x^1, ..., x^N}` of agent states;
//! - [`EmpiricalMeasure`]: integer counts over an indexed support, i.e. an
//!   element of `P_N`, the measures expressible as an average of `N` Diracs;
//! - [`SimplexMeasure`]: an arbitrary probability vector over the support.
//!
//! Two Wasserstein-1 notions accompany them. Between equal-size clouds the
//! exact distance is the minimal average matching cost
//! `min_rho (1/N) sum_i |x^i - rho(x^i)|`, computed by optimal assignment
//! ([`w1_matching`]). Between measures on the same finite support the crate
//! adopts the coordinate-gap formula `W1(mu, nu) = sum_i |mu_i - nu_i|`
//! ([`w1_discrete`]); note this equals twice the usual total-variation
//! Wasserstein under the 0/1 metric, and every aggregation bound in
//! [`crate::diagnostics`] is stated against this convention.
//!
//! [`nearest_empirical`] is the aggregation map `rho`: the `w1_discrete`
//! projection of a simplex point onto `P_n`, ties broken by lowest
//! enumeration index.

use crate::error::Error;
use crate::grid::{euclid, StateGrid};
use crate::Result;
use rand::Rng;

/// Enumerations larger than this fail with [`Error::CapExceeded`] by default.
pub const DEFAULT_ENUMERATION_CAP: u128 = 5_000_000;

/// Counts of `N` agents over an indexed support; weights are `counts/N`.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct EmpiricalMeasure {
    counts: Vec<u32>,
    total: u32,
}

impl EmpiricalMeasure {
    pub fn new(counts: Vec<u32>) -> Result<Self> {
        if counts.is_empty() {
            return Err(Error::invalid("empirical measure needs a non-empty support"));
        }
        let total = counts.iter().sum();
        if total == 0 {
            return Err(Error::invalid("empirical measure needs at least one agent"));
        }
        Ok(EmpiricalMeasure { counts, total })
    }

    /// All `n` agents on one atom.
    pub fn dirac(support: usize, atom: usize, n: u32) -> Self {
        let mut counts = vec![0; support];
        counts[atom] = n;
        EmpiricalMeasure { counts, total: n }
    }

    pub fn counts(&self) -> &[u32] {
        &self.counts
    }

    pub fn count(&self, i: usize) -> u32 {
        self.counts[i]
    }

    pub fn total(&self) -> u32 {
        self.total
    }

    pub fn support_size(&self) -> usize {
        self.counts.len()
    }

    pub fn weights(&self) -> Vec<f64> {
        let n = self.total as f64;
        self.counts.iter().map(|&c| c as f64 / n).collect()
    }

    pub fn to_simplex(&self) -> SimplexMeasure {
        SimplexMeasure {
            weights: self.weights(),
        }
    }

    /// Coordinate-gap `W1` against another measure on the same support.
    pub fn w1(&self, other: &EmpiricalMeasure) -> Result<f64> {
        w1_discrete(&self.weights(), &other.weights())
    }
}

/// Probability vector over an indexed support; renormalized on construction.
#[derive(Debug, Clone, PartialEq)]
pub struct SimplexMeasure {
    weights: Vec<f64>,
}

impl SimplexMeasure {
    pub fn new(weights: Vec<f64>) -> Result<Self> {
        if weights.is_empty() {
            return Err(Error::invalid("simplex measure needs a non-empty support"));
        }
        let sum: f64 = weights.iter().sum();
        if weights.iter().any(|w| *w < 0.0 || !w.is_finite()) || (sum - 1.0).abs() > 1e-9 {
            return Err(Error::invalid(format!(
                "simplex weights must be non-negative and sum to 1, got {sum}"
            )));
        }
        Ok(SimplexMeasure {
            weights: weights.iter().map(|w| w / sum).collect(),
        })
    }

    pub fn dirac(support: usize, atom: usize) -> Self {
        let mut weights = vec![0.0; support];
        weights[atom] = 1.0;
        SimplexMeasure { weights }
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn support_size(&self) -> usize {
        self.weights.len()
    }

    pub fn w1(&self, other: &SimplexMeasure) -> Result<f64> {
        w1_discrete(&self.weights, &other.weights)
    }

    /// `n` i.i.d. draws from the measure, tallied into an empirical measure.
    pub fn sample_empirical(&self, n: u32, rng: &mut impl Rng) -> EmpiricalMeasure {
        let mut counts = vec![0u32; self.weights.len()];
        for _ in 0..n {
            let u: f64 = rng.random();
            let mut acc = 0.0;
            let mut chosen = self.weights.len() - 1;
            for (i, w) in self.weights.iter().enumerate() {
                acc += w;
                if u < acc {
                    chosen = i;
                    break;
                }
            }
            counts[chosen] += 1;
        }
        EmpiricalMeasure { counts, total: n }
    }
}

/// Joint counts over (state atom, action atom) with a fixed state marginal.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct JointEmpiricalMeasure {
    counts: Vec<Vec<u32>>,
    total: u32,
}

impl JointEmpiricalMeasure {
    pub fn new(counts: Vec<Vec<u32>>) -> Result<Self> {
        if counts.is_empty() || counts[0].is_empty() {
            return Err(Error::invalid("joint measure needs a non-empty count matrix"));
        }
        let k = counts[0].len();
        if counts.iter().any(|row| row.len() != k) {
            return Err(Error::invalid("joint measure rows must have equal length"));
        }
        let total = counts.iter().flatten().sum();
        if total == 0 {
            return Err(Error::invalid("joint measure needs at least one agent"));
        }
        Ok(JointEmpiricalMeasure { counts, total })
    }

    pub fn counts(&self) -> &[Vec<u32>] {
        &self.counts
    }

    pub fn total(&self) -> u32 {
        self.total
    }

    pub fn num_states(&self) -> usize {
        self.counts.len()
    }

    pub fn num_actions(&self) -> usize {
        self.counts[0].len()
    }

    /// Row sums: the measure's marginal on the state atoms.
    pub fn state_marginal(&self) -> Vec<u32> {
        self.counts.iter().map(|row| row.iter().sum()).collect()
    }

    /// Checks the defining constraint `Theta(., U) = mu(.)`.
    pub fn matches_marginal(&self, mu: &EmpiricalMeasure) -> bool {
        self.num_states() == mu.support_size() && self.state_marginal() == mu.counts
    }
}

/// A raw cloud of `N` agent states in `R^l`.
#[derive(Debug, Clone, PartialEq)]
pub struct PointCloudMeasure {
    points: Vec<Vec<f64>>,
}

impl PointCloudMeasure {
    pub fn new(points: Vec<Vec<f64>>) -> Result<Self> {
        if points.is_empty() {
            return Err(Error::invalid("point cloud needs at least one point"));
        }
        let dim = points[0].len();
        if dim == 0 || points.iter().any(|p| p.len() != dim) {
            return Err(Error::invalid("point cloud needs equal positive dimensions"));
        }
        Ok(PointCloudMeasure { points })
    }

    pub fn points(&self) -> &[Vec<f64>] {
        &self.points
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.points[0].len()
    }
}

/// Multiset coefficient `C(n + m - 1, m - 1)`: the size of `P_n` over `m` atoms.
///
/// Saturates at `u128::MAX` instead of overflowing.
pub fn multiset_count(support_size: usize, n: u32) -> u128 {
    let m = support_size as u128;
    if m == 0 {
        return 0;
    }
    let k = (m - 1).min(n as u128);
    let total = n as u128 + m - 1;
    let mut result: u128 = 1;
    for i in 1..=k {
        result = match result.checked_mul(total - k + i) {
            Some(v) => v / i,
            None => return u128::MAX,
        };
    }
    result
}

/// All count vectors of length `support_size` summing to `n`, in
/// lexicographically decreasing order, guarded by the default cap.
pub fn enumerate_pn(support_size: usize, n: u32) -> Result<Vec<EmpiricalMeasure>> {
    enumerate_pn_capped(support_size, n, DEFAULT_ENUMERATION_CAP)
}

/// As [`enumerate_pn`] with an explicit cap.
pub fn enumerate_pn_capped(
    support_size: usize,
    n: u32,
    cap: u128,
) -> Result<Vec<EmpiricalMeasure>> {
    if support_size == 0 || n == 0 {
        return Err(Error::invalid("enumeration needs support_size >= 1 and n >= 1"));
    }
    let count = multiset_count(support_size, n);
    if count > cap {
        return Err(Error::CapExceeded {
            what: format!("P_{n} over {support_size} atoms"),
            count,
            cap,
        });
    }
    let mut out = Vec::with_capacity(count as usize);
    let mut prefix = Vec::with_capacity(support_size);
    push_compositions(n, support_size, &mut prefix, &mut |counts| {
        out.push(EmpiricalMeasure {
            counts: counts.to_vec(),
            total: n,
        });
    });
    Ok(out)
}

/// Emits compositions of `remaining` into `parts` slots in decreasing lex order.
pub(crate) fn push_compositions(
    remaining: u32,
    parts: usize,
    prefix: &mut Vec<u32>,
    emit: &mut impl FnMut(&[u32]),
) {
    if parts == 1 {
        prefix.push(remaining);
        emit(prefix);
        prefix.pop();
        return;
    }
    for k in (0..=remaining).rev() {
        prefix.push(k);
        push_compositions(remaining - k, parts - 1, prefix, emit);
        prefix.pop();
    }
}

/// Coordinate-gap `W1` between weight vectors on the same support.
pub fn w1_discrete(a: &[f64], b: &[f64]) -> Result<f64> {
    if a.len() != b.len() {
        return Err(Error::SupportMismatch {
            left: a.len(),
            right: b.len(),
        });
    }
    Ok(a.iter().zip(b).map(|(x, y)| (x - y).abs()).sum())
}

/// Exact minimal average matching cost between equal-size clouds.
///
/// 1-D clouds use the sort-and-pair shortcut; higher dimensions solve the
/// assignment problem exactly.
pub fn w1_matching(a: &PointCloudMeasure, b: &PointCloudMeasure) -> Result<f64> {
    if a.len() != b.len() {
        return Err(Error::SizeMismatch {
            left: a.len(),
            right: b.len(),
        });
    }
    if a.dim() != b.dim() {
        return Err(Error::invalid("clouds must share a dimension"));
    }
    let n = a.len();
    if a.dim() == 1 {
        let mut xs: Vec<f64> = a.points().iter().map(|p| p[0]).collect();
        let mut ys: Vec<f64> = b.points().iter().map(|p| p[0]).collect();
        xs.sort_by(f64::total_cmp);
        ys.sort_by(f64::total_cmp);
        return Ok(xs
            .iter()
            .zip(&ys)
            .map(|(x, y)| (x - y).abs())
            .sum::<f64>()
            / n as f64);
    }
    let cost: Vec<Vec<f64>> = a
        .points()
        .iter()
        .map(|p| b.points().iter().map(|q| euclid(p, q)).collect())
        .collect();
    let assignment = hungarian(&cost);
    Ok(assignment
        .iter()
        .enumerate()
        .map(|(i, &j)| cost[i][j])
        .sum::<f64>()
        / n as f64)
}

/// Exact minimum-cost assignment (Jonker–Volgenant style shortest augmenting
/// paths with potentials, `O(n^3)`); returns the column matched to each row.
fn hungarian(cost: &[Vec<f64>]) -> Vec<usize> {
    let n = cost.len();
    let mut u = vec![0.0f64; n + 1];
    let mut v = vec![0.0f64; n + 1];
    let mut matched = vec![0usize; n + 1]; // row matched to each column, 0 = free
    let mut way = vec![0usize; n + 1];
    for i in 1..=n {
        matched[0] = i;
        let mut j0 = 0usize;
        let mut minv = vec![f64::INFINITY; n + 1];
        let mut used = vec![false; n + 1];
        loop {
            used[j0] = true;
            let i0 = matched[j0];
            let mut delta = f64::INFINITY;
            let mut j1 = 0usize;
            for j in 1..=n {
                if used[j] {
                    continue;
                }
                let cur = cost[i0 - 1][j - 1] - u[i0] - v[j];
                if cur < minv[j] {
                    minv[j] = cur;
                    way[j] = j0;
                }
                if minv[j] < delta {
                    delta = minv[j];
                    j1 = j;
                }
            }
            for j in 0..=n {
                if used[j] {
                    u[matched[j]] += delta;
                    v[j] -= delta;
                } else {
                    minv[j] -= delta;
                }
            }
            j0 = j1;
            if matched[j0] == 0 {
                break;
            }
        }
        loop {
            let j1 = way[j0];
            matched[j0] = matched[j1];
            j0 = j1;
            if j0 == 0 {
                break;
            }
        }
    }
    let mut row_to_col = vec![0usize; n];
    for j in 1..=n {
        row_to_col[matched[j] - 1] = j - 1;
    }
    row_to_col
}

/// Index and distance of the `w1_discrete`-nearest measure in `candidates`.
///
/// Ties go to the lowest index, so passing an enumeration in its canonical
/// order reproduces the deterministic aggregation map.
pub fn nearest_in(candidates: &[EmpiricalMeasure], mu: &SimplexMeasure) -> (usize, f64) {
    assert!(!candidates.is_empty(), "need at least one candidate");
    let mut best = (0usize, f64::INFINITY);
    for (i, cand) in candidates.iter().enumerate() {
        let d = w1_discrete(&cand.weights(), mu.weights()).expect("aligned supports");
        if d < best.1 {
            best = (i, d);
        }
    }
    best
}

/// The aggregation map `rho`: nearest `n`-empirical measure under
/// `w1_discrete`, ties broken by lowest enumeration index.
pub fn nearest_empirical(mu: &SimplexMeasure, n: u32) -> Result<(EmpiricalMeasure, f64)> {
    let candidates = enumerate_pn(mu.support_size(), n)?;
    let (idx, dist) = nearest_in(&candidates, mu);
    Ok((candidates[idx].clone(), dist))
}

/// Counts of cloud points per grid cell.
pub fn project_to_grid(cloud: &PointCloudMeasure, grid: &StateGrid) -> Result<EmpiricalMeasure> {
    let mut counts = vec![0u32; grid.num_cells()];
    for p in cloud.points() {
        counts[grid.quantize(p)?] += 1;
    }
    Ok(EmpiricalMeasure {
        counts,
        total: cloud.len() as u32,
    })
}

/// Number of joint measures with state marginal `mu` over `num_atoms` actions.
pub fn admissible_count(mu: &EmpiricalMeasure, num_atoms: usize) -> u128 {
    let mut count: u128 = 1;
    for &c in mu.counts() {
        if c == 0 {
            continue;
        }
        count = count.saturating_mul(multiset_count(num_atoms, c));
    }
    count
}

/// All joint count matrices whose row sums equal `mu`'s counts.
///
/// Occupied rows run through their compositions in decreasing lex order with
/// earlier rows varying slowest; unoccupied rows are zero.
pub fn admissible_actions(
    mu: &EmpiricalMeasure,
    num_atoms: usize,
    cap: u128,
) -> Result<Vec<JointEmpiricalMeasure>> {
    if num_atoms == 0 {
        return Err(Error::EmptyActionGrid);
    }
    let count = admissible_count(mu, num_atoms);
    if count > cap {
        return Err(Error::CapExceeded {
            what: format!("admissible actions at counts {:?}", mu.counts()),
            count,
            cap,
        });
    }
    let m = mu.support_size();
    let mut out = Vec::with_capacity(count as usize);
    let mut rows: Vec<Vec<u32>> = vec![vec![0; num_atoms]; m];
    fn rec(
        mu: &EmpiricalMeasure,
        num_atoms: usize,
        cell: usize,
        rows: &mut Vec<Vec<u32>>,
        out: &mut Vec<JointEmpiricalMeasure>,
        total: u32,
    ) {
        if cell == mu.support_size() {
            out.push(JointEmpiricalMeasure {
                counts: rows.clone(),
                total,
            });
            return;
        }
        if mu.count(cell) == 0 {
            rec(mu, num_atoms, cell + 1, rows, out, total);
            return;
        }
        let mut prefix = Vec::with_capacity(num_atoms);
        push_compositions(mu.count(cell), num_atoms, &mut prefix, &mut |row| {
            rows[cell] = row.to_vec();
            rec(mu, num_atoms, cell + 1, rows, out, total);
        });
        rows[cell] = vec![0; num_atoms];
    }
    rec(mu, num_atoms, 0, &mut rows, &mut out, mu.total());
    Ok(out)
}

/// A symmetric randomized agent rule: one action distribution per cell.
#[derive(Debug, Clone, PartialEq)]
pub struct AgentRule {
    probs: Vec<Vec<f64>>,
}

impl AgentRule {
    pub fn new(probs: Vec<Vec<f64>>) -> Result<Self> {
        if probs.is_empty() || probs[0].is_empty() {
            return Err(Error::invalid("agent rule needs a non-empty matrix"));
        }
        let k = probs[0].len();
        let mut normalized = Vec::with_capacity(probs.len());
        for row in &probs {
            if row.len() != k {
                return Err(Error::invalid("agent rule rows must have equal length"));
            }
            let sum: f64 = row.iter().sum();
            if row.iter().any(|p| *p < 0.0 || !p.is_finite()) || (sum - 1.0).abs() > 1e-9 {
                return Err(Error::invalid(format!(
                    "agent rule row must be a distribution, sums to {sum}"
                )));
            }
            normalized.push(row.iter().map(|p| p / sum).collect());
        }
        Ok(AgentRule { probs: normalized })
    }

    pub fn uniform(cells: usize, num_atoms: usize) -> Self {
        AgentRule {
            probs: vec![vec![1.0 / num_atoms as f64; num_atoms]; cells],
        }
    }

    pub fn probs(&self) -> &[Vec<f64>] {
        &self.probs
    }

    pub fn row(&self, cell: usize) -> &[f64] {
        &self.probs[cell]
    }

    pub fn num_cells(&self) -> usize {
        self.probs.len()
    }

    pub fn num_atoms(&self) -> usize {
        self.probs[0].len()
    }

    /// Draws an action atom index for an agent sitting in `cell`.
    pub fn sample_action(&self, cell: usize, rng: &mut impl Rng) -> usize {
        let row = &self.probs[cell];
        let u: f64 = rng.random();
        let mut acc = 0.0;
        for (k, p) in row.iter().enumerate() {
            acc += p;
            if u < acc {
                return k;
            }
        }
        row.len() - 1
    }
}

/// Conditional kernel `gamma(u | x)` of a joint measure: count ratios on
/// occupied rows, uniform on unoccupied rows (declared convention).
pub fn disintegrate(theta: &JointEmpiricalMeasure) -> AgentRule {
    let k = theta.num_actions();
    let probs = theta
        .counts()
        .iter()
        .map(|row| {
            let sum: u32 = row.iter().sum();
            if sum == 0 {
                vec![1.0 / k as f64; k]
            } else {
                row.iter().map(|&c| c as f64 / sum as f64).collect()
            }
        })
        .collect();
    AgentRule { probs }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cloud(points: &[f64]) -> PointCloudMeasure {
        PointCloudMeasure::new(points.iter().map(|&x| vec![x]).collect()).unwrap()
    }

    #[test]
    fn enumerate_pn_two_atoms_two_agents() {
        let states = enumerate_pn(2, 2).unwrap();
        let counts: Vec<&[u32]> = states.iter().map(|s| s.counts()).collect();
        assert_eq!(counts, vec![&[2, 0][..], &[1, 1], &[0, 2]]);
    }

    #[test]
    fn enumerate_pn_single_atom() {
        let states = enumerate_pn(1, 5).unwrap();
        assert_eq!(states.len(), 1);
        assert_eq!(states[0].counts(), &[5]);
    }

    #[test]
    fn enumerate_pn_three_atoms_two_agents() {
        let states = enumerate_pn(3, 2).unwrap();
        assert_eq!(states.len(), 6, "multiset coefficient C(4, 2)");
        assert_eq!(multiset_count(3, 2), 6);
        for w in states.windows(2) {
            assert!(w[0].counts() > w[1].counts(), "decreasing lex order");
        }
    }

    #[test]
    fn enumerate_pn_cap_reports_exact_count() {
        match enumerate_pn_capped(4, 100, 1000) {
            Err(Error::CapExceeded { count, cap, .. }) => {
                assert_eq!(count, multiset_count(4, 100));
                assert_eq!(cap, 1000);
            }
            other => panic!("expected CapExceeded, got {other:?}"),
        }
    }

    #[test]
    fn multiset_count_matches_enumeration() {
        for m in 1..=4usize {
            for n in 1..=6u32 {
                assert_eq!(
                    multiset_count(m, n),
                    enumerate_pn(m, n).unwrap().len() as u128,
                    "m={m} n={n}"
                );
            }
        }
    }

    #[test]
    fn w1_discrete_examples() {
        assert_eq!(w1_discrete(&[1.0, 0.0], &[0.0, 1.0]).unwrap(), 2.0);
        assert_eq!(w1_discrete(&[0.3, 0.7], &[0.3, 0.7]).unwrap(), 0.0);
        let d = w1_discrete(&[0.6, 0.4], &[0.5, 0.5]).unwrap();
        assert!((d - 0.2).abs() < 1e-15);
        assert!(matches!(
            w1_discrete(&[1.0], &[0.5, 0.5]),
            Err(Error::SupportMismatch { .. })
        ));
    }

    #[test]
    fn w1_matching_examples() {
        assert_eq!(w1_matching(&cloud(&[0.0, 1.0]), &cloud(&[0.0, 1.0])).unwrap(), 0.0);
        assert_eq!(w1_matching(&cloud(&[0.0, 0.0]), &cloud(&[1.0, 1.0])).unwrap(), 1.0);
        let d = w1_matching(&cloud(&[0.0, 0.4]), &cloud(&[0.1, 0.5])).unwrap();
        assert!((d - 0.1).abs() < 1e-15);
        assert!(matches!(
            w1_matching(&cloud(&[0.0]), &cloud(&[0.0, 1.0])),
            Err(Error::SizeMismatch { .. })
        ));
    }

    #[test]
    fn w1_matching_beats_identity_pairing() {
        // crossing pairs must be uncrossed by the optimal matching
        let d = w1_matching(&cloud(&[0.0, 1.0]), &cloud(&[1.0, 0.0])).unwrap();
        assert_eq!(d, 0.0);
    }

    fn brute_force_matching(a: &PointCloudMeasure, b: &PointCloudMeasure) -> f64 {
        fn perms(items: &mut Vec<usize>, k: usize, out: &mut Vec<Vec<usize>>) {
            if k == items.len() {
                out.push(items.clone());
                return;
            }
            for i in k..items.len() {
                items.swap(k, i);
                perms(items, k + 1, out);
                items.swap(k, i);
            }
        }
        let n = a.len();
        let mut idx: Vec<usize> = (0..n).collect();
        let mut all = Vec::new();
        perms(&mut idx, 0, &mut all);
        all.iter()
            .map(|perm| {
                perm.iter()
                    .enumerate()
                    .map(|(i, &j)| euclid(&a.points()[i], &b.points()[j]))
                    .sum::<f64>()
                    / n as f64
            })
            .fold(f64::INFINITY, f64::min)
    }

    #[test]
    fn hungarian_matches_brute_force_2d() {
        let mut rng = crate::seeding::stream(&[42]);
        for _ in 0..50 {
            let n = rng.random_range(1..=5usize);
            let draw = |rng: &mut rand_chacha::ChaCha8Rng| -> Vec<Vec<f64>> {
                (0..n)
                    .map(|_| vec![rng.random::<f64>(), rng.random::<f64>()])
                    .collect()
            };
            let a = PointCloudMeasure::new(draw(&mut rng)).unwrap();
            let b = PointCloudMeasure::new(draw(&mut rng)).unwrap();
            let exact = w1_matching(&a, &b).unwrap();
            let brute = brute_force_matching(&a, &b);
            assert!((exact - brute).abs() < 1e-12, "{exact} vs {brute}");
        }
    }

    #[test]
    fn nearest_empirical_projection() {
        let mu = SimplexMeasure::new(vec![0.6, 0.4]).unwrap();
        let (rho, dist) = nearest_empirical(&mu, 2).unwrap();
        assert_eq!(rho.counts(), &[1, 1]);
        assert!((dist - 0.2).abs() < 1e-15, "candidates at 0.8, 0.2, 1.2");
    }

    #[test]
    fn nearest_empirical_tie_takes_lowest_index() {
        let mu = SimplexMeasure::new(vec![0.75, 0.25]).unwrap();
        let (rho, dist) = nearest_empirical(&mu, 2).unwrap();
        assert_eq!(rho.counts(), &[2, 0], "(2,0) and (1,1) tie at 0.5");
        assert!((dist - 0.5).abs() < 1e-15);
    }

    #[test]
    fn nearest_empirical_idempotent_on_empirical_inputs() {
        for e in enumerate_pn(3, 4).unwrap() {
            let (rho, dist) = nearest_empirical(&e.to_simplex(), 4).unwrap();
            assert_eq!(rho, e);
            assert_eq!(dist, 0.0);
        }
    }

    #[test]
    fn project_to_grid_counts_membership() {
        let grid = StateGrid::uniform(
            crate::grid::BoxBounds::interval(0.0, 1.0).unwrap(),
            &[2],
        )
        .unwrap();
        let mu = project_to_grid(&cloud(&[0.1, 0.2]), &grid).unwrap();
        assert_eq!(mu.counts(), &[2, 0]);
        let mu = project_to_grid(&cloud(&[0.1, 0.9]), &grid).unwrap();
        assert_eq!(mu.counts(), &[1, 1]);
        let rep = grid.representative(1).to_vec();
        let mu = project_to_grid(
            &PointCloudMeasure::new(vec![rep.clone(), rep]).unwrap(),
            &grid,
        )
        .unwrap();
        assert_eq!(mu.counts(), &[0, 2]);
    }

    #[test]
    fn admissible_actions_counts_and_order() {
        let mu = EmpiricalMeasure::new(vec![2, 0]).unwrap();
        let actions = admissible_actions(&mu, 2, DEFAULT_ENUMERATION_CAP).unwrap();
        let rows: Vec<&[u32]> = actions.iter().map(|a| &a.counts()[0][..]).collect();
        assert_eq!(rows, vec![&[2, 0][..], &[1, 1], &[0, 2]]);
        assert!(actions.iter().all(|a| a.counts()[1] == vec![0, 0]));

        let mu = EmpiricalMeasure::new(vec![1, 1]).unwrap();
        assert_eq!(admissible_actions(&mu, 2, DEFAULT_ENUMERATION_CAP).unwrap().len(), 4);
        assert_eq!(admissible_count(&mu, 2), 4);

        let mu = EmpiricalMeasure::new(vec![0, 1, 0]).unwrap();
        assert_eq!(admissible_actions(&mu, 5, DEFAULT_ENUMERATION_CAP).unwrap().len(), 5);
    }

    #[test]
    fn admissible_actions_marginals_match() {
        let mu = EmpiricalMeasure::new(vec![2, 1]).unwrap();
        for theta in admissible_actions(&mu, 3, DEFAULT_ENUMERATION_CAP).unwrap() {
            assert!(theta.matches_marginal(&mu));
        }
    }

    #[test]
    fn disintegrate_count_ratios() {
        let theta = JointEmpiricalMeasure::new(vec![vec![1, 1], vec![2, 0]]).unwrap();
        let rule = disintegrate(&theta);
        assert_eq!(rule.row(0), &[0.5, 0.5]);
        assert_eq!(rule.row(1), &[1.0, 0.0]);
    }

    #[test]
    fn disintegrate_unoccupied_row_is_uniform() {
        let theta = JointEmpiricalMeasure::new(vec![vec![0, 0], vec![1, 1]]).unwrap();
        let rule = disintegrate(&theta);
        assert_eq!(rule.row(0), &[0.5, 0.5]);
    }

    #[test]
    fn disintegrate_recomposes_on_occupied_rows() {
        let theta = JointEmpiricalMeasure::new(vec![vec![3, 1], vec![0, 2]]).unwrap();
        let rule = disintegrate(&theta);
        let marginal = theta.state_marginal();
        for (i, row) in theta.counts().iter().enumerate() {
            for (k, &c) in row.iter().enumerate() {
                if marginal[i] > 0 {
                    let recomposed = rule.row(i)[k] * marginal[i] as f64;
                    assert!((recomposed - c as f64).abs() < 1e-12);
                }
            }
        }
    }

    #[test]
    fn sample_empirical_total_and_distribution() {
        let mu = SimplexMeasure::new(vec![0.5, 0.5]).unwrap();
        let mut rng = crate::seeding::stream(&[7]);
        let e = mu.sample_empirical(5, &mut rng);
        assert_eq!(e.total(), 5);
        assert_eq!(e.counts().iter().sum::<u32>(), 5);
    }
}
