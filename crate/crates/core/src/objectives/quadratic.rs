use rand::RngCore;
use serde::{Deserialize, Serialize};

use super::{check_point, standard_normal_vec, BatchSampler, BatchSize, GradientSample, NoiseThirdMoment, StochasticObjective};
use crate::error::{invalid, Error, Result};
use crate::linalg::{dot, psd_sqrt, Matrix, SymmetricEigen, Tensor3};

/// `L_γ(x) = ½ xᵀA x − (b + ξ)ᵀx` with `ξ ~ N(0, S)`.
///
/// The expected gradient is `A x − b`, the single-sample noise covariance is the
/// constant `S`, and the gradient noise is Gaussian. With `A` positive definite
/// the matching SDE is an Ornstein–Uhlenbeck process, see [`OuLaw`].
#[derive(Debug, Clone)]
pub struct QuadraticGaussianObjective {
    a: Matrix,
    b_mean: Vec<f64>,
    s: Matrix,
    s_root: Matrix,
    a_eigen: SymmetricEigen,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
struct QuadraticParts {
    a: Vec<Vec<f64>>,
    b_mean: Vec<f64>,
    s: Vec<Vec<f64>>,
}

impl QuadraticGaussianObjective {
    /// `A` must be symmetric PSD (positive definite for the stationary
    /// oracles); `S` symmetric PSD.
    pub fn new(a: Matrix, b_mean: Vec<f64>, s: Matrix) -> Result<Self> {
        let d = b_mean.len();
        if d == 0 {
            return Err(invalid("quadratic objective needs d ≥ 1"));
        }
        for m in [&a, &s] {
            if m.rows() != d || m.cols() != d {
                return Err(Error::DimensionMismatch { expected: d, got: m.rows() });
            }
            if !m.is_finite() || !m.is_symmetric(1e-12) {
                return Err(invalid("A and S must be finite symmetric matrices"));
            }
        }
        let a_eigen = SymmetricEigen::new(&a)?;
        if a_eigen.min_value() < -1e-12 * a_eigen.max_abs_value().max(1.0) {
            return Err(invalid("A must be positive semidefinite"));
        }
        let s_root = psd_sqrt(&s).map_err(|_| invalid("S must be positive semidefinite"))?;
        Ok(Self { a, b_mean, s, s_root, a_eigen })
    }

    /// Isotropic helper: `A = diag(a)`, `S = diag(s)`.
    pub fn diagonal(a: &[f64], b_mean: Vec<f64>, s: &[f64]) -> Result<Self> {
        Self::new(Matrix::from_diag(a), b_mean, Matrix::from_diag(s))
    }

    pub fn a(&self) -> &Matrix {
        &self.a
    }

    pub fn b_mean(&self) -> &[f64] {
        &self.b_mean
    }

    pub fn s(&self) -> &Matrix {
        &self.s
    }

    pub fn is_positive_definite(&self) -> bool {
        self.a_eigen.min_value() > 0.0
    }

    /// `A⁻¹ b`, the mean of the stationary law.
    pub fn stationary_mean(&self) -> Result<Vec<f64>> {
        if !self.is_positive_definite() {
            return Err(invalid("stationary mean requires positive definite A"));
        }
        let eig = &self.a_eigen;
        let inv = eig.reconstruct_with(|l| 1.0 / l);
        Ok(inv.matvec(&self.b_mean))
    }

    /// Law at time `t` of `dX = −(A X − b) dt + (η Σ^B)^{1/2} dW`, `X_0 = x0`.
    pub fn ou_law(&self, x0: &[f64], t: f64, eta: f64, batch: BatchSize) -> Result<OuLaw> {
        check_point(x0, self.dim())?;
        if !(t >= 0.0) || !(eta > 0.0) {
            return Err(invalid("OU law needs t ≥ 0 and η > 0"));
        }
        let d = self.dim();
        let v = &self.a_eigen.vectors;
        let alpha = &self.a_eigen.values;
        let c = v.tr_matvec(x0);
        let bp = v.tr_matvec(&self.b_mean);
        let mean_eig: Vec<f64> = (0..d)
            .map(|i| (-alpha[i] * t).exp() * c[i] + bp[i] * decay_integral(alpha[i], t))
            .collect();
        let mean = v.matvec(&mean_eig);

        let diffusion = self.s.scaled(eta / batch.value());
        let dp = v.transpose().matmul(&diffusion).matmul(v);
        let mut cov_eig = Matrix::zeros(d, d);
        for i in 0..d {
            for j in 0..d {
                cov_eig[(i, j)] = dp[(i, j)] * decay_integral(alpha[i] + alpha[j], t);
            }
        }
        let mut covariance = v.matmul(&cov_eig).matmul(&v.transpose());
        covariance.symmetrize();
        Ok(OuLaw { mean, covariance })
    }

    fn gradient_mean(&self, x: &[f64]) -> Vec<f64> {
        let mut g = self.a.matvec(x);
        for (gi, bi) in g.iter_mut().zip(&self.b_mean) {
            *gi -= bi;
        }
        g
    }

    /// Serialized as `{ "a": [[..]], "b_mean": [..], "s": [[..]] }`.
    pub fn to_json_value(&self) -> serde_json::Value {
        serde_json::to_value(QuadraticParts { a: self.a.to_rows(), b_mean: self.b_mean.clone(), s: self.s.to_rows() })
            .expect("plain data serializes")
    }
}

/// `∫₀ᵗ e^{−s u} du`, finite as `s → 0`.
fn decay_integral(s: f64, t: f64) -> f64 {
    if s.abs() * t < 1e-12 {
        t
    } else {
        -(-s * t).exp_m1() / s
    }
}

/// Gaussian law `N(mean, covariance)` of an OU process at a fixed time.
#[derive(Debug, Clone)]
pub struct OuLaw {
    pub mean: Vec<f64>,
    pub covariance: Matrix,
}

impl OuLaw {
    /// Raw third moment `E X^{⊗3} = m^{⊗3} + 3 sym(m ⊗ C)` of a Gaussian.
    pub fn third_raw_moment(&self) -> Tensor3 {
        let mut t = Tensor3::cube(&self.mean);
        t.add_scaled(3.0, &Tensor3::sym_vec_mat(&self.mean, &self.covariance));
        t
    }

    /// Raw second moment `C + m mᵀ`.
    pub fn second_raw_moment(&self) -> Matrix {
        let mut m = self.covariance.clone();
        m.add_outer(1.0, &self.mean);
        m
    }
}

impl StochasticObjective for QuadraticGaussianObjective {
    fn dim(&self) -> usize {
        self.b_mean.len()
    }

    fn family(&self) -> &'static str {
        "quadratic"
    }

    fn loss(&self, x: &[f64]) -> Result<f64> {
        check_point(x, self.dim())?;
        Ok(0.5 * dot(x, &self.a.matvec(x)) - dot(&self.b_mean, x))
    }

    fn expected_gradient(&self, x: &[f64]) -> Result<Vec<f64>> {
        check_point(x, self.dim())?;
        Ok(self.gradient_mean(x))
    }

    fn noise_covariance(&self, x: &[f64], batch: BatchSize) -> Result<Matrix> {
        check_point(x, self.dim())?;
        Ok(self.s.scaled(1.0 / batch.value()))
    }

    fn hessian_vector_product(&self, x: &[f64], v: &[f64]) -> Result<Vec<f64>> {
        check_point(x, self.dim())?;
        check_point(v, self.dim())?;
        Ok(self.a.matvec(v))
    }

    fn noise_third_moment(&self, x: &[f64], _batch: BatchSize) -> Result<NoiseThirdMoment> {
        check_point(x, self.dim())?;
        Ok(NoiseThirdMoment::zeros(self.dim()))
    }

    fn sample_gradient(
        &self,
        x: &[f64],
        batch: BatchSize,
        _sampler: &mut BatchSampler,
        rng: &mut dyn RngCore,
    ) -> Result<GradientSample> {
        let noise = self.sample_gaussian_noise(x, batch, rng)?;
        let mut gradient = self.gradient_mean(x);
        for (g, n) in gradient.iter_mut().zip(&noise) {
            *g -= n;
        }
        Ok(GradientSample { gradient, batch_ids: Vec::new() })
    }

    fn sample_gaussian_noise(&self, x: &[f64], batch: BatchSize, rng: &mut dyn RngCore) -> Result<Vec<f64>> {
        check_point(x, self.dim())?;
        let z = standard_normal_vec(self.dim(), rng);
        let scale = 1.0 / batch.value().sqrt();
        Ok(self.s_root.matvec(&z).into_iter().map(|v| v * scale).collect())
    }
}
