//! The user-facing agent model.
//!
//! An [`AgentModel`] packages the coupled dynamics
//! `x' = f(x, u, mf, w, w0)`, the stage cost `c(x, u, mf)`, both noise
//! sources, the discount `beta`, and the declared Lipschitz constants `K_f`
//! and `K_c` of `f` and `c` with respect to `(x, u, mf)` under the metric
//! `|x - x'| + |u - u'| + W1(mf, mf')`. The constants are user inputs: every
//! suboptimality bound is meaningless with wrong constants, so they are
//! validated by sampling ([`estimate_lipschitz`]) rather than inferred.
//!
//! The mean-field argument is a [`MeanField`]: a finitely supported
//! distribution over agent states, either an agent cloud with uniform weights
//! or grid representatives with simplex weights.

use crate::error::Error;
use crate::grid::{euclid, BoxBounds};
use crate::measures::{w1_matching, PointCloudMeasure};
use crate::seeding;
use crate::Result;
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use std::fmt;
use std::sync::Arc;

/// Finitely supported distribution over agent states, passed to `f` and `c`.
#[derive(Debug, Clone, PartialEq)]
pub struct MeanField {
    points: Vec<Vec<f64>>,
    weights: Vec<f64>,
}

impl MeanField {
    /// Empirical measure of a cloud: uniform weight `1/N` per point.
    pub fn from_cloud(points: &[Vec<f64>]) -> Self {
        let n = points.len().max(1);
        MeanField {
            points: points.to_vec(),
            weights: vec![1.0 / n as f64; points.len()],
        }
    }

    /// Weighted support; weights must be non-negative and sum to 1 within 1e-9.
    pub fn from_weighted(points: Vec<Vec<f64>>, weights: Vec<f64>) -> Result<Self> {
        if points.is_empty() || points.len() != weights.len() {
            return Err(Error::invalid("mean field needs matching points and weights"));
        }
        let sum: f64 = weights.iter().sum();
        if weights.iter().any(|w| *w < 0.0 || !w.is_finite()) || (sum - 1.0).abs() > 1e-9 {
            return Err(Error::invalid(format!(
                "mean-field weights must be non-negative and sum to 1, got {sum}"
            )));
        }
        let weights = weights.iter().map(|w| w / sum).collect();
        Ok(MeanField { points, weights })
    }

    pub fn points(&self) -> &[Vec<f64>] {
        &self.points
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    /// Mean of coordinate `dim` under the measure.
    pub fn mean(&self, dim: usize) -> f64 {
        self.points
            .iter()
            .zip(&self.weights)
            .map(|(p, w)| w * p[dim])
            .sum()
    }

    /// Expectation of an arbitrary observable.
    pub fn expect(&self, f: impl Fn(&[f64]) -> f64) -> f64 {
        self.points
            .iter()
            .zip(&self.weights)
            .map(|(p, w)| w * f(p))
            .sum()
    }
}

/// A scalar noise source: finite atoms with probabilities, or a seeded sampler.
#[derive(Clone)]
pub enum Noise {
    /// Finite support `(value, probability)`; probabilities sum to 1 within 1e-12.
    Atoms(Vec<(f64, f64)>),
    /// Arbitrary sampler driven by the caller's stream.
    Sampler(Arc<dyn Fn(&mut ChaCha8Rng) -> f64 + Send + Sync>),
}

impl Noise {
    /// Deterministic source: a single atom at 0.
    pub fn none() -> Self {
        Noise::Atoms(vec![(0.0, 1.0)])
    }

    pub fn atoms(atoms: Vec<(f64, f64)>) -> Result<Self> {
        if atoms.is_empty() {
            return Err(Error::invalid("noise needs at least one atom"));
        }
        let total: f64 = atoms.iter().map(|(_, p)| p).sum();
        if atoms.iter().any(|(v, p)| !v.is_finite() || *p < 0.0) || (total - 1.0).abs() > 1e-12 {
            return Err(Error::invalid(format!(
                "noise atom probabilities must be non-negative and sum to 1, got {total}"
            )));
        }
        Ok(Noise::Atoms(atoms))
    }

    pub fn sampler(f: impl Fn(&mut ChaCha8Rng) -> f64 + Send + Sync + 'static) -> Self {
        Noise::Sampler(Arc::new(f))
    }

    /// Finite support if available.
    pub fn support(&self) -> Option<&[(f64, f64)]> {
        match self {
            Noise::Atoms(a) => Some(a),
            Noise::Sampler(_) => None,
        }
    }

    pub fn is_finite(&self) -> bool {
        matches!(self, Noise::Atoms(_))
    }

    /// Draws one value; finite support uses inverse-CDF on one uniform.
    pub fn sample(&self, rng: &mut ChaCha8Rng) -> f64 {
        match self {
            Noise::Atoms(atoms) => {
                let u: f64 = rng.random();
                let mut acc = 0.0;
                for (v, p) in atoms {
                    acc += p;
                    if u < acc {
                        return *v;
                    }
                }
                atoms[atoms.len() - 1].0
            }
            Noise::Sampler(f) => f(rng),
        }
    }
}

impl fmt::Debug for Noise {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Noise::Atoms(a) => f.debug_tuple("Atoms").field(a).finish(),
            Noise::Sampler(_) => f.write_str("Sampler(..)"),
        }
    }
}

pub type DynamicsFn = Arc<dyn Fn(&[f64], &[f64], &MeanField, f64, f64) -> Vec<f64> + Send + Sync>;
pub type CostFn = Arc<dyn Fn(&[f64], &[f64], &MeanField) -> f64 + Send + Sync>;

/// The weakly coupled agent model; immutable after construction.
#[derive(Clone)]
pub struct AgentModel {
    name: String,
    state_bounds: BoxBounds,
    action_bounds: BoxBounds,
    dynamics: DynamicsFn,
    stage_cost: CostFn,
    idio_noise: Noise,
    common_noise: Noise,
    k_f: f64,
    k_c: f64,
    beta: f64,
}

impl fmt::Debug for AgentModel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("AgentModel")
            .field("name", &self.name)
            .field("state_bounds", &self.state_bounds)
            .field("action_bounds", &self.action_bounds)
            .field("idio_noise", &self.idio_noise)
            .field("common_noise", &self.common_noise)
            .field("k_f", &self.k_f)
            .field("k_c", &self.k_c)
            .field("beta", &self.beta)
            .finish()
    }
}

impl AgentModel {
    pub fn builder() -> ModelBuilder {
        ModelBuilder::default()
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn state_dim(&self) -> usize {
        self.state_bounds.dim()
    }

    pub fn action_dim(&self) -> usize {
        self.action_bounds.dim()
    }

    pub fn state_bounds(&self) -> &BoxBounds {
        &self.state_bounds
    }

    pub fn action_bounds(&self) -> &BoxBounds {
        &self.action_bounds
    }

    pub fn idio_noise(&self) -> &Noise {
        &self.idio_noise
    }

    pub fn common_noise(&self) -> &Noise {
        &self.common_noise
    }

    pub fn k_f(&self) -> f64 {
        self.k_f
    }

    pub fn k_c(&self) -> f64 {
        self.k_c
    }

    pub fn beta(&self) -> f64 {
        self.beta
    }

    /// Same model with a different discount.
    pub fn with_beta(mut self, beta: f64) -> Result<Self> {
        if !(beta > 0.0 && beta < 1.0) {
            return Err(Error::invalid(format!("beta must lie in (0,1), got {beta}")));
        }
        self.beta = beta;
        Ok(self)
    }

    /// One dynamics step `f(x, u, mf, w, w0)`.
    pub fn step(&self, x: &[f64], u: &[f64], mf: &MeanField, w: f64, w0: f64) -> Vec<f64> {
        let next = (self.dynamics)(x, u, mf, w, w0);
        debug_assert_eq!(next.len(), self.state_dim());
        next
    }

    /// Stage cost `c(x, u, mf)`.
    pub fn cost(&self, x: &[f64], u: &[f64], mf: &MeanField) -> f64 {
        (self.stage_cost)(x, u, mf)
    }

    pub fn contraction(&self) -> ContractionReport {
        validate_contraction(self.k_f, self.beta)
    }

    /// Samples the author's contract that dynamics stay inside the state box.
    pub fn check_bounds(&self, samples: usize, seed: u64) -> Result<()> {
        let mut rng = seeding::stream(&[seed, 0xB0D5]);
        for _ in 0..samples {
            let x = self.state_bounds.sample(&mut rng);
            let u = self.action_bounds.sample(&mut rng);
            let cloud: Vec<Vec<f64>> =
                (0..4).map(|_| self.state_bounds.sample(&mut rng)).collect();
            let mf = MeanField::from_cloud(&cloud);
            let w = self.idio_noise.sample(&mut rng);
            let w0 = self.common_noise.sample(&mut rng);
            let next = self.step(&x, &u, &mf, w, w0);
            if !self.state_bounds.contains(&next) {
                return Err(Error::OutOfBounds { point: next });
            }
        }
        Ok(())
    }
}

/// Value and verdict of the contraction condition `2 K_f beta < 1`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ContractionReport {
    pub value: f64,
    pub satisfied: bool,
}

/// All value-error bounds require `2 K_f beta < 1`; calculators refuse otherwise.
pub fn validate_contraction(k_f: f64, beta: f64) -> ContractionReport {
    let value = 2.0 * k_f * beta;
    ContractionReport {
        value,
        satisfied: value < 1.0,
    }
}

/// Sampled lower bounds on the Lipschitz constants of `f` and `c`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LipschitzEstimate {
    pub f_bound: f64,
    pub c_bound: f64,
    /// Sampled bound exceeds the declared constant beyond rounding slack.
    pub f_exceeds_declared: bool,
    pub c_exceeds_declared: bool,
}

/// Estimates Lipschitz constants from random argument pairs.
///
/// Pairs cycle through perturbing only the state, only the action, and only
/// the mean field, so each constant is probed where it binds; the cloud
/// distance uses exact minimal matching. Estimates are lower bounds on the
/// true constants.
pub fn estimate_lipschitz(model: &AgentModel, samples: usize, seed: u64) -> LipschitzEstimate {
    assert!(samples >= 2, "need at least two samples");
    let mut rng = seeding::stream(&[seed, 0x11B5]);
    let cloud_size = 8;
    let mut f_bound = 0.0f64;
    let mut c_bound = 0.0f64;
    for i in 0..samples {
        let x = model.state_bounds.sample(&mut rng);
        let u = model.action_bounds.sample(&mut rng);
        let cloud: Vec<Vec<f64>> = (0..cloud_size)
            .map(|_| model.state_bounds.sample(&mut rng))
            .collect();
        let (mut x2, mut u2, mut cloud2) = (x.clone(), u.clone(), cloud.clone());
        match i % 3 {
            0 => x2 = model.state_bounds.sample(&mut rng),
            1 => u2 = model.action_bounds.sample(&mut rng),
            _ => {
                cloud2 = (0..cloud_size)
                    .map(|_| model.state_bounds.sample(&mut rng))
                    .collect()
            }
        }
        let w1 = w1_matching(
            &PointCloudMeasure::new(cloud.clone()).expect("non-empty cloud"),
            &PointCloudMeasure::new(cloud2.clone()).expect("non-empty cloud"),
        )
        .expect("equal sizes");
        let denom = euclid(&x, &x2) + euclid(&u, &u2) + w1;
        if denom < 1e-12 {
            continue;
        }
        let mf = MeanField::from_cloud(&cloud);
        let mf2 = MeanField::from_cloud(&cloud2);
        let w = model.idio_noise.sample(&mut rng);
        let w0 = model.common_noise.sample(&mut rng);
        let df = euclid(&model.step(&x, &u, &mf, w, w0), &model.step(&x2, &u2, &mf2, w, w0));
        let dc = (model.cost(&x, &u, &mf) - model.cost(&x2, &u2, &mf2)).abs();
        f_bound = f_bound.max(df / denom);
        c_bound = c_bound.max(dc / denom);
    }
    LipschitzEstimate {
        f_bound,
        c_bound,
        f_exceeds_declared: f_bound > model.k_f + 1e-9,
        c_exceeds_declared: c_bound > model.k_c + 1e-9,
    }
}

/// Builder for [`AgentModel`]; all fields except the name are required.
#[derive(Default)]
pub struct ModelBuilder {
    name: Option<String>,
    state_bounds: Option<BoxBounds>,
    action_bounds: Option<BoxBounds>,
    dynamics: Option<DynamicsFn>,
    stage_cost: Option<CostFn>,
    idio_noise: Option<Noise>,
    common_noise: Option<Noise>,
    k_f: Option<f64>,
    k_c: Option<f64>,
    beta: Option<f64>,
}

impl ModelBuilder {
    pub fn name(mut self, name: impl Into<String>) -> Self {
        self.name = Some(name.into());
        self
    }

    pub fn state_bounds(mut self, bounds: BoxBounds) -> Self {
        self.state_bounds = Some(bounds);
        self
    }

    pub fn action_bounds(mut self, bounds: BoxBounds) -> Self {
        self.action_bounds = Some(bounds);
        self
    }

    pub fn dynamics(
        mut self,
        f: impl Fn(&[f64], &[f64], &MeanField, f64, f64) -> Vec<f64> + Send + Sync + 'static,
    ) -> Self {
        self.dynamics = Some(Arc::new(f));
        self
    }

    pub fn stage_cost(
        mut self,
        c: impl Fn(&[f64], &[f64], &MeanField) -> f64 + Send + Sync + 'static,
    ) -> Self {
        self.stage_cost = Some(Arc::new(c));
        self
    }

    pub fn idio_noise(mut self, noise: Noise) -> Self {
        self.idio_noise = Some(noise);
        self
    }

    pub fn common_noise(mut self, noise: Noise) -> Self {
        self.common_noise = Some(noise);
        self
    }

    /// Declared Lipschitz constants of `f` and `c`.
    pub fn lipschitz(mut self, k_f: f64, k_c: f64) -> Self {
        self.k_f = Some(k_f);
        self.k_c = Some(k_c);
        self
    }

    pub fn beta(mut self, beta: f64) -> Self {
        self.beta = Some(beta);
        self
    }

    pub fn build(self) -> Result<AgentModel> {
        let missing = |what: &str| Error::invalid(format!("model builder missing {what}"));
        let beta = self.beta.ok_or_else(|| missing("beta"))?;
        if !(beta > 0.0 && beta < 1.0) {
            return Err(Error::invalid(format!("beta must lie in (0,1), got {beta}")));
        }
        let k_f = self.k_f.ok_or_else(|| missing("lipschitz constants"))?;
        let k_c = self.k_c.ok_or_else(|| missing("lipschitz constants"))?;
        if !(k_f >= 0.0 && k_f.is_finite() && k_c >= 0.0 && k_c.is_finite()) {
            return Err(Error::invalid("Lipschitz constants must be finite and >= 0"));
        }
        Ok(AgentModel {
            name: self.name.unwrap_or_else(|| "anonymous".to_string()),
            state_bounds: self.state_bounds.ok_or_else(|| missing("state bounds"))?,
            action_bounds: self.action_bounds.ok_or_else(|| missing("action bounds"))?,
            dynamics: self.dynamics.ok_or_else(|| missing("dynamics"))?,
            stage_cost: self.stage_cost.ok_or_else(|| missing("stage cost"))?,
            idio_noise: self.idio_noise.ok_or_else(|| missing("idiosyncratic noise"))?,
            common_noise: self.common_noise.ok_or_else(|| missing("common noise"))?,
            k_f,
            k_c,
            beta,
        })
    }
}
