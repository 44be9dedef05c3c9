use rand::{Rng, RngCore};
use rand_distr::Poisson;

use super::{check_point, BatchSampler, BatchSize, GradientSample, NoiseThirdMoment, StochasticObjective};
use crate::error::{invalid, Result};
use crate::linalg::{Matrix, Tensor3};

/// One-dimensional `L_a(x) = a·x` with `a ~ Poisson(λ_p)`.
///
/// The batch-`B` gradient is `Z(Bλ_p)/B` for a Poisson process `Z`, which
/// makes sense for fractional `B` as well.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PoissonLinearObjective {
    rate: f64,
}

impl PoissonLinearObjective {
    pub fn new(rate: f64) -> Result<Self> {
        if !(rate.is_finite() && rate > 0.0) {
            return Err(invalid(format!("Poisson rate must be positive, got {rate}")));
        }
        Ok(Self { rate })
    }

    pub fn rate(&self) -> f64 {
        self.rate
    }

    /// One draw of `Z(Bλ_p)/B`.
    pub fn sample_scalar(&self, batch: BatchSize, rng: &mut dyn RngCore) -> f64 {
        let mean = batch.value() * self.rate;
        let z: f64 = rng.sample(Poisson::new(mean).expect("positive finite mean"));
        z / batch.value()
    }
}

impl StochasticObjective for PoissonLinearObjective {
    fn dim(&self) -> usize {
        1
    }

    fn family(&self) -> &'static str {
        "poisson"
    }

    fn loss(&self, x: &[f64]) -> Result<f64> {
        check_point(x, 1)?;
        Ok(self.rate * x[0])
    }

    fn expected_gradient(&self, x: &[f64]) -> Result<Vec<f64>> {
        check_point(x, 1)?;
        Ok(vec![self.rate])
    }

    fn noise_covariance(&self, x: &[f64], batch: BatchSize) -> Result<Matrix> {
        check_point(x, 1)?;
        Ok(Matrix::from_diag(&[self.rate / batch.value()]))
    }

    fn hessian_vector_product(&self, x: &[f64], v: &[f64]) -> Result<Vec<f64>> {
        check_point(x, 1)?;
        check_point(v, 1)?;
        Ok(vec![0.0])
    }

    fn noise_third_moment(&self, x: &[f64], batch: BatchSize) -> Result<NoiseThirdMoment> {
        check_point(x, 1)?;
        let b = batch.value();
        Ok(NoiseThirdMoment { tensor: Tensor3::scalar(self.rate / (b * b)) })
    }

    fn sample_gradient(
        &self,
        x: &[f64],
        batch: BatchSize,
        _sampler: &mut BatchSampler,
        rng: &mut dyn RngCore,
    ) -> Result<GradientSample> {
        check_point(x, 1)?;
        Ok(GradientSample { gradient: vec![self.sample_scalar(batch, rng)], batch_ids: Vec::new() })
    }
}
