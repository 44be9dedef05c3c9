//! Stochastic objectives `L_γ` with analytic oracles.
//!
//! Each family exposes its expected gradient, the covariance and third central
//! moment of the mini-batch gradient noise, and an exact Hessian-vector product,
//! alongside a sampler for the stochastic gradient itself.

mod poisson;
mod quadratic;
mod rayleigh;

pub use poisson::PoissonLinearObjective;
pub use quadratic::{OuLaw, QuadraticGaussianObjective};
pub use rayleigh::{RayleighDatasetSpec, RayleighQuotientObjective};

use std::fmt;

use rand::seq::SliceRandom;
use rand::{Rng, RngCore};
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{psd_sqrt, Matrix, Tensor3};

/// Parameter vector `x ∈ ℝ^d` with finite entries.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<f64>", into = "Vec<f64>")]
pub struct ParamVec(Vec<f64>);

impl ParamVec {
    pub fn new(values: Vec<f64>) -> Result<Self> {
        if values.is_empty() {
            return Err(Error::InvalidParameter("parameter vector must have d ≥ 1".into()));
        }
        if !values.iter().all(|v| v.is_finite()) {
            return Err(Error::NonFinite("parameter vector"));
        }
        Ok(Self(values))
    }

    pub fn zeros(dim: usize) -> Self {
        Self(vec![0.0; dim.max(1)])
    }

    pub fn into_inner(self) -> Vec<f64> {
        self.0
    }
}

impl TryFrom<Vec<f64>> for ParamVec {
    type Error = Error;

    fn try_from(v: Vec<f64>) -> Result<Self> {
        Self::new(v)
    }
}

impl From<ParamVec> for Vec<f64> {
    fn from(p: ParamVec) -> Self {
        p.0
    }
}

impl std::ops::Deref for ParamVec {
    type Target = [f64];

    fn deref(&self) -> &[f64] {
        &self.0
    }
}

/// Mini-batch size. Dataset objectives need a positive integer; the Poisson
/// objective also accepts fractional sizes.
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd, Serialize, Deserialize)]
#[serde(try_from = "f64", into = "f64")]
pub struct BatchSize(f64);

impl BatchSize {
    pub fn new(b: f64) -> Result<Self> {
        if b.is_finite() && b > 0.0 {
            Ok(Self(b))
        } else {
            Err(Error::InvalidBatchSize(b))
        }
    }

    pub fn value(self) -> f64 {
        self.0
    }

    pub fn is_integral(self) -> bool {
        self.0.fract() == 0.0
    }

    /// Integer batch size for dataset objectives.
    pub fn count(self) -> Result<usize> {
        if self.is_integral() && self.0 >= 1.0 {
            Ok(self.0 as usize)
        } else {
            Err(Error::InvalidBatchSize(self.0))
        }
    }
}

impl Default for BatchSize {
    fn default() -> Self {
        Self(1.0)
    }
}

impl TryFrom<f64> for BatchSize {
    type Error = Error;

    fn try_from(b: f64) -> Result<Self> {
        Self::new(b)
    }
}

impl From<BatchSize> for f64 {
    fn from(b: BatchSize) -> f64 {
        b.0
    }
}

/// How a mini-batch is drawn from a finite dataset.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SamplingMode {
    /// i.i.d. indices; the mode the theory assumes.
    #[default]
    WithReplacement,
    /// Distinct indices within each batch.
    WithoutReplacement,
    /// Walk through a fresh random permutation each epoch, dropping a short tail.
    Shuffle,
}

/// Draws batch indices according to a [`SamplingMode`]. Holds the epoch
/// permutation for [`SamplingMode::Shuffle`], so one sampler belongs to one
/// trajectory.
#[derive(Debug, Clone)]
pub struct BatchSampler {
    mode: SamplingMode,
    perm: Vec<usize>,
    cursor: usize,
}

impl BatchSampler {
    pub fn new(mode: SamplingMode) -> Self {
        Self { mode, perm: Vec::new(), cursor: 0 }
    }

    pub fn mode(&self) -> SamplingMode {
        self.mode
    }

    pub fn draw(&mut self, n: usize, b: usize, rng: &mut dyn RngCore) -> Result<Vec<usize>> {
        if b == 0 {
            return Err(Error::InvalidBatchSize(0.0));
        }
        match self.mode {
            SamplingMode::WithReplacement => Ok((0..b).map(|_| rng.random_range(0..n)).collect()),
            SamplingMode::WithoutReplacement => {
                if b > n {
                    return Err(Error::BatchTooLarge { batch: b, dataset: n });
                }
                Ok(rand::seq::index::sample(rng, n, b).into_vec())
            }
            SamplingMode::Shuffle => {
                if b > n {
                    return Err(Error::BatchTooLarge { batch: b, dataset: n });
                }
                if self.perm.len() != n || self.cursor + b > n {
                    self.perm = (0..n).collect();
                    self.perm.shuffle(rng);
                    self.cursor = 0;
                }
                let ids = self.perm[self.cursor..self.cursor + b].to_vec();
                self.cursor += b;
                Ok(ids)
            }
        }
    }
}

/// One stochastic gradient draw.
#[derive(Debug, Clone, PartialEq)]
pub struct GradientSample {
    pub gradient: Vec<f64>,
    /// Dataset indices of the batch; empty for generator-based objectives.
    pub batch_ids: Vec<usize>,
}

/// Third central moment `Λ = E(∇L_γ − ∇L)^{⊗3}` of the batch gradient.
#[derive(Debug, Clone, PartialEq)]
pub struct NoiseThirdMoment {
    pub tensor: Tensor3,
}

impl NoiseThirdMoment {
    pub fn zeros(dim: usize) -> Self {
        Self { tensor: Tensor3::zeros(dim) }
    }
}

/// A family of losses `L_γ` together with the analytic quantities the
/// laboratory compares simulations against.
///
/// Implementations are immutable and shareable across threads; all randomness
/// comes from the caller's stream.
pub trait StochasticObjective: Send + Sync + fmt::Debug {
    fn dim(&self) -> usize;

    fn family(&self) -> &'static str;

    /// `L(c x) = L(x)` for every `c > 0`.
    fn is_scale_invariant(&self) -> bool {
        false
    }

    /// Expected loss `L(x) = E L_γ(x)`.
    fn loss(&self, x: &[f64]) -> Result<f64>;

    fn expected_gradient(&self, x: &[f64]) -> Result<Vec<f64>>;

    /// Covariance of the batch-`B` gradient, `Σ^B(x) = Σ¹(x)/B`.
    fn noise_covariance(&self, x: &[f64], batch: BatchSize) -> Result<Matrix>;

    /// `Tr Σ^B(x)`.
    fn noise_trace(&self, x: &[f64], batch: BatchSize) -> Result<f64> {
        Ok(self.noise_covariance(x, batch)?.trace())
    }

    fn hessian_vector_product(&self, x: &[f64], v: &[f64]) -> Result<Vec<f64>>;

    /// Third central moment of the batch-`B` gradient.
    fn noise_third_moment(&self, x: &[f64], batch: BatchSize) -> Result<NoiseThirdMoment>;

    fn sample_gradient(
        &self,
        x: &[f64],
        batch: BatchSize,
        sampler: &mut BatchSampler,
        rng: &mut dyn RngCore,
    ) -> Result<GradientSample>;

    /// A draw from `N(0, Σ^B(x))`.
    ///
    /// The default multiplies a standard Gaussian vector by the symmetric PSD
    /// square root of the analytic covariance.
    fn sample_gaussian_noise(&self, x: &[f64], batch: BatchSize, rng: &mut dyn RngCore) -> Result<Vec<f64>> {
        let root = psd_sqrt(&self.noise_covariance(x, batch)?)?;
        let z = standard_normal_vec(self.dim(), rng);
        Ok(root.matvec(&z))
    }
}

pub(crate) fn standard_normal_vec(dim: usize, rng: &mut dyn RngCore) -> Vec<f64> {
    (0..dim).map(|_| rng.sample(StandardNormal)).collect()
}

pub(crate) fn check_point(x: &[f64], dim: usize) -> Result<()> {
    if x.len() != dim {
        return Err(Error::DimensionMismatch { expected: dim, got: x.len() });
    }
    if !x.iter().all(|v| v.is_finite()) {
        return Err(Error::NonFinite("parameter vector"));
    }
    Ok(())
}
