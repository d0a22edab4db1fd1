//! Closed-form suboptimality bounds from the model constants, estimators
//! for the projection and sampling radii, and empirical checks that solved
//! models stay inside the bounds.
//!
//! Every bound requires the contraction margin `1 - 2 K_f beta > 0`; the
//! sampling-population radius additionally carries a Monte Carlo standard
//! error that callers fold into their tolerance.

use crate::error::Error;
use crate::mdp::{FiniteMeasureMDP, MdpKind};
use crate::measures::{
    enumerate_pn, nearest_in, w1_discrete, w1_matching, PointCloudMeasure, SimplexMeasure,
};
use crate::model::AgentModel;
use crate::seeding;
use crate::Result;
use rand::Rng;

fn margin(k_f: f64, beta: f64) -> Result<f64> {
    if !(0.0..1.0).contains(&beta) || beta <= 0.0 {
        return Err(Error::invalid(format!("beta {beta} outside (0, 1)")));
    }
    let product = 2.0 * k_f * beta;
    if product >= 1.0 {
        return Err(Error::ContractionViolated(product));
    }
    Ok(1.0 - product)
}

/// Cost of restricting joint actions to the atom set:
/// `K_c L_U / ((1 - 2 K_f beta)(1 - beta))`.
pub fn bound_action(k_c: f64, k_f: f64, beta: f64, l_u: f64) -> Result<f64> {
    Ok(k_c * l_u / (margin(k_f, beta)? * (1.0 - beta)))
}

/// Value gap between the quantized and continuous models:
/// `2 K_c L_X / ((1 - beta)(1 - 2 K_f beta))`.
pub fn bound_discretization(k_c: f64, k_f: f64, beta: f64, l_x: f64) -> Result<f64> {
    Ok(2.0 * k_c * l_x / ((1.0 - beta) * margin(k_f, beta)?))
}

/// Performance loss of the extracted policy in the original system:
/// `4 K_c L_X / ((1 - beta)^2 (1 - 2 K_f beta))`.
pub fn bound_regret(k_c: f64, k_f: f64, beta: f64, l_x: f64) -> Result<f64> {
    Ok(4.0 * k_c * l_x / ((1.0 - beta) * (1.0 - beta) * margin(k_f, beta)?))
}

/// Lipschitz modulus of the optimal value in `W1`:
/// `2 K_c / (1 - 2 K_f beta)`.
pub fn bound_value_lipschitz(k_c: f64, k_f: f64, beta: f64) -> Result<f64> {
    Ok(2.0 * k_c / margin(k_f, beta)?)
}

/// How candidate measures are generated when taking a sup over the simplex.
#[derive(Debug, Clone, Copy)]
pub enum SimplexSearch {
    /// All measures with coordinates on the `1/steps` lattice.
    Grid { steps: u32 },
    /// Uniform (flat Dirichlet) draws.
    Sampled { samples: usize, seed: u64 },
}

impl SimplexSearch {
    pub fn candidates(&self, cells: usize) -> Result<Vec<SimplexMeasure>> {
        match *self {
            SimplexSearch::Grid { steps } => {
                if steps == 0 {
                    return Err(Error::invalid("grid search needs at least one step"));
                }
                Ok(enumerate_pn(cells, steps)?
                    .iter()
                    .map(|e| e.to_simplex())
                    .collect())
            }
            SimplexSearch::Sampled { samples, seed } => {
                if samples == 0 {
                    return Err(Error::invalid("sampled search needs at least one draw"));
                }
                let mut rng = seeding::stream(&[seed, 0x51e7]);
                let mut out = Vec::with_capacity(samples);
                for _ in 0..samples {
                    // flat Dirichlet via normalized exponentials
                    let gaps: Vec<f64> = (0..cells)
                        .map(|_| -(1.0 - rng.random::<f64>()).ln())
                        .collect();
                    let sum: f64 = gaps.iter().sum();
                    let weights = if sum > 0.0 {
                        gaps.iter().map(|g| g / sum).collect()
                    } else {
                        vec![1.0 / cells as f64; cells]
                    };
                    out.push(SimplexMeasure::new(weights)?);
                }
                Ok(out)
            }
        }
    }
}

/// Largest distance from a searched measure to its nearest `n`-empirical
/// projection: the projection radius `m_n`.
pub fn estimate_m_n(cells: usize, n: u32, search: &SimplexSearch) -> Result<f64> {
    let targets = enumerate_pn(cells, n)?;
    let mut worst = 0.0f64;
    for mu in search.candidates(cells)? {
        let (_, d) = nearest_in(&targets, &mu);
        worst = worst.max(d);
    }
    Ok(worst)
}

/// Monte Carlo estimate of `E W1(empirical of n draws, mu)`.
pub fn expected_empirical_w1(
    mu: &SimplexMeasure,
    n: u32,
    samples: usize,
    seed: u64,
) -> Result<(f64, f64)> {
    if samples == 0 || n == 0 {
        return Err(Error::invalid("need n >= 1 and at least one sample"));
    }
    let mut rng = seeding::stream(&[seed, 0xe3b]);
    let mut dists = Vec::with_capacity(samples);
    for _ in 0..samples {
        let emp = mu.sample_empirical(n, &mut rng);
        dists.push(w1_discrete(&emp.weights(), mu.weights())?);
    }
    let mean = dists.iter().sum::<f64>() / samples as f64;
    let stderr = if samples > 1 {
        let var = dists.iter().map(|d| (d - mean) * (d - mean)).sum::<f64>()
            / (samples - 1) as f64;
        (var / samples as f64).sqrt()
    } else {
        0.0
    };
    Ok((mean, stderr))
}

/// Sampling radius `M_n`: the searched sup of the expected empirical
/// deviation, reported with the standard error at the maximizer.
pub fn estimate_big_m_n(
    cells: usize,
    n: u32,
    samples: usize,
    search: &SimplexSearch,
    seed: u64,
) -> Result<(f64, f64)> {
    let mut worst = (0.0f64, 0.0f64);
    for (i, mu) in search.candidates(cells)?.into_iter().enumerate() {
        let (mean, stderr) = expected_empirical_w1(&mu, n, samples, seeding::mix(&[seed, i as u64]))?;
        if mean > worst.0 {
            worst = (mean, stderr);
        }
    }
    Ok(worst)
}

/// One measured quantity against its theoretical bound.
#[derive(Debug, Clone)]
pub struct BoundReport {
    pub name: String,
    /// Measured side of the inequality.
    pub lhs: f64,
    /// Theoretical side.
    pub rhs: f64,
    pub satisfied: bool,
    /// Constants and witnesses the comparison used.
    pub inputs: Vec<(String, f64)>,
}

impl BoundReport {
    pub fn new(name: impl Into<String>, lhs: f64, rhs: f64) -> Self {
        BoundReport {
            name: name.into(),
            lhs,
            rhs,
            satisfied: lhs <= rhs + 1e-9,
            inputs: Vec::new(),
        }
    }

    pub fn with_input(mut self, key: impl Into<String>, value: f64) -> Self {
        self.inputs.push((key.into(), value));
        self
    }

    pub fn csv_header() -> &'static str {
        "name,lhs,rhs,satisfied,inputs"
    }

    /// One CSV row; inputs join as `key=value` pairs separated by `;`.
    pub fn csv_row(&self) -> String {
        let inputs = self
            .inputs
            .iter()
            .map(|(k, v)| format!("{k}={v:?}"))
            .collect::<Vec<_>>()
            .join(";");
        format!(
            "{},{:?},{:?},{},{}",
            self.name, self.lhs, self.rhs, self.satisfied, inputs
        )
    }
}

/// Samples random state pairs of a solved model and verifies
/// `|V(s) - V(t)| <= bound * W1(s, t)`.
///
/// Population states are compared by exact matching between their
/// representative clouds; aggregated and sampled states by the coordinate
/// gap of their weights.
pub fn check_value_lipschitz(
    model: &AgentModel,
    mdp: &FiniteMeasureMDP,
    values: &[f64],
    pairs: usize,
    seed: u64,
) -> Result<BoundReport> {
    if values.len() != mdp.num_states() {
        return Err(Error::SizeMismatch {
            left: values.len(),
            right: mdp.num_states(),
        });
    }
    let bound = bound_value_lipschitz(model.k_c(), model.k_f(), model.beta())?;
    let base = |worst: f64| {
        BoundReport::new("value-lipschitz", worst, bound)
            .with_input("k_c", model.k_c())
            .with_input("k_f", model.k_f())
            .with_input("beta", model.beta())
    };
    if mdp.num_states() < 2 {
        return Ok(base(0.0).with_input("pairs", 0.0));
    }
    let population = matches!(mdp.kind(), MdpKind::FinitePopulation { .. });
    let clouds: Vec<PointCloudMeasure> = if population {
        mdp.states()
            .iter()
            .map(|e| {
                let mut points = Vec::with_capacity(e.total() as usize);
                for (cell, &count) in e.counts().iter().enumerate() {
                    for _ in 0..count {
                        points.push(mdp.state_reps()[cell].clone());
                    }
                }
                PointCloudMeasure::new(points)
            })
            .collect::<Result<_>>()?
    } else {
        Vec::new()
    };
    let mut rng = seeding::stream(&[seed, 0x11b]);
    let mut checked = 0usize;
    let mut worst = (0.0f64, 0usize, 0usize, 0.0f64);
    while checked < pairs {
        let s = rng.random_range(0..mdp.num_states());
        let t = rng.random_range(0..mdp.num_states());
        if s == t {
            continue;
        }
        let dist = if population {
            w1_matching(&clouds[s], &clouds[t])?
        } else {
            w1_discrete(&mdp.state(s).weights(), &mdp.state(t).weights())?
        };
        checked += 1;
        if dist <= 0.0 {
            continue;
        }
        let ratio = (values[s] - values[t]).abs() / dist;
        if ratio > worst.0 {
            worst = (ratio, s, t, dist);
        }
    }
    Ok(base(worst.0)
        .with_input("pairs", checked as f64)
        .with_input("worst_s", worst.1 as f64)
        .with_input("worst_t", worst.2 as f64)
        .with_input("worst_distance", worst.3))
}

/// Least-squares slope through the origin for `ys ~ slope * xs`.
pub fn fit_constant(xs: &[f64], ys: &[f64]) -> Result<f64> {
    if xs.len() != ys.len() {
        return Err(Error::SizeMismatch {
            left: xs.len(),
            right: ys.len(),
        });
    }
    let sxx: f64 = xs.iter().map(|x| x * x).sum();
    if sxx <= 0.0 {
        return Err(Error::invalid("need a nonzero regressor"));
    }
    let sxy: f64 = xs.iter().zip(ys).map(|(x, y)| x * y).sum();
    Ok(sxy / sxx)
}
