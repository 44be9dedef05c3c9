//! Tail-index estimator for symmetric α-stable samples and its expectation on
//! correlated Gaussian input.

use std::fmt::Write as _;

use rand::RngCore;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::linalg::Matrix;
use crate::rng::StreamKey;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TailIndexReport {
    /// Estimate of `1/α`.
    pub inv_alpha_hat: f64,
    pub k1: usize,
    pub k2: usize,
    pub n_samples: usize,
}

/// `(1/log K₁)·((1/K₂) Σ_i log|Y_i| − (1/K) Σ_j log|X_j|)` where `Y_i` sums the
/// `i`-th consecutive block of `K₁` samples.
pub fn estimate_tail_index(samples: &[f64], k1: usize, k2: usize) -> Result<TailIndexReport> {
    if k1 < 2 || k2 < 2 {
        return Err(invalid(format!("K1 and K2 must be ≥ 2, got {k1} and {k2}")));
    }
    if k1.checked_mul(k2) != Some(samples.len()) {
        return Err(invalid(format!("K1·K2 = {}·{} does not match {} samples", k1, k2, samples.len())));
    }
    let mut log_x = 0.0;
    let mut log_y = 0.0;
    for block in samples.chunks_exact(k1) {
        let mut y = 0.0;
        for &v in block {
            if v == 0.0 {
                return Err(Error::Undefined("zero sample: log|X| is undefined".into()));
            }
            if !v.is_finite() {
                return Err(Error::NonFinite("sample"));
            }
            log_x += v.abs().ln();
            y += v;
        }
        if y == 0.0 {
            return Err(Error::Undefined("zero block sum: log|Y| is undefined".into()));
        }
        log_y += y.abs().ln();
    }
    let inv = (log_y / k2 as f64 - log_x / samples.len() as f64) / (k1 as f64).ln();
    Ok(TailIndexReport { inv_alpha_hat: inv, k1, k2, n_samples: samples.len() })
}

/// Expected estimator value when each block of `K₁ = d·m` holds `m`
/// independent draws of `N(0, Σ)`:
/// `½(log m + log 1ᵀΣ1 − (1/d) Σ_i log Σ_ii)/(log m + log d)`.
pub fn expected_gaussian_estimate(d: usize, m: usize, sigma: &Matrix) -> Result<f64> {
    if d == 0 || m == 0 || d * m < 2 {
        return Err(invalid(format!("need d, m ≥ 1 and d·m ≥ 2, got d = {d}, m = {m}")));
    }
    if sigma.rows() != d || !sigma.is_square() {
        return Err(Error::DimensionMismatch { expected: d, got: sigma.rows() });
    }
    let diag = sigma.diag();
    if diag.iter().any(|v| !(*v > 0.0)) {
        return Err(invalid("Σ must have a positive diagonal"));
    }
    let total: f64 = sigma.as_slice().iter().sum();
    if !(total > 0.0) {
        return Err(invalid("1ᵀΣ1 must be positive"));
    }
    let mean_log_diag = diag.iter().map(|v| v.ln()).sum::<f64>() / d as f64;
    let (lm, ld) = ((m as f64).ln(), (d as f64).ln());
    Ok(0.5 * (lm + total.ln() - mean_log_diag) / (lm + ld))
}

/// `β11ᵀ + (1 − β)I`.
pub fn equicorrelated(d: usize, beta: f64) -> Result<Matrix> {
    if !(0.0..=1.0).contains(&beta) {
        return Err(invalid(format!("β must lie in [0, 1], got {beta}")));
    }
    let mut m = Matrix::zeros(d, d);
    for i in 0..d {
        for j in 0..d {
            m[(i, j)] = if i == j { 1.0 } else { beta };
        }
    }
    Ok(m)
}

/// Fills `out` with one draw of `N(0, β11ᵀ + (1 − β)I)`: `√β c + √(1−β) z`.
fn equicorrelated_draw(beta: f64, out: &mut [f64], rng: &mut dyn RngCore) {
    let c: f64 = StandardNormal.sample(rng);
    let (a, b) = (beta.sqrt(), (1.0 - beta).sqrt());
    for v in out.iter_mut() {
        let z: f64 = StandardNormal.sample(rng);
        *v = a * c + b * z;
    }
}

/// Standard Cauchy as a ratio of independent standard normals.
pub fn cauchy_draw(rng: &mut dyn RngCore) -> f64 {
    let a: f64 = StandardNormal.sample(rng);
    let b: f64 = StandardNormal.sample(rng);
    a / b
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BiasPoint {
    pub beta: f64,
    pub expected: f64,
    pub empirical_mean: f64,
    pub stderr: f64,
    pub repetitions: usize,
}

impl BiasPoint {
    /// `|empirical − expected| / SE`, with exact agreement up to rounding
    /// counting as 0 when the SE vanishes.
    pub fn z(&self) -> f64 {
        let diff = (self.empirical_mean - self.expected).abs();
        let floor = 1e-12 * self.expected.abs().max(1.0);
        if diff <= floor {
            0.0
        } else {
            diff / self.stderr
        }
    }
}

fn mean_se(v: &[f64]) -> (f64, f64) {
    let n = v.len() as f64;
    let m = v.iter().sum::<f64>() / n;
    let var = v.iter().map(|x| (x - m) * (x - m)).sum::<f64>() / (n - 1.0);
    (m, (var / n).sqrt())
}

fn repeat(repetitions: usize, key: &StreamKey, one: impl Fn(&mut dyn RngCore) -> Result<f64> + Sync) -> Result<(f64, f64)> {
    if repetitions < 2 {
        return Err(invalid("need at least 2 repetitions"));
    }
    let vals: Vec<f64> = (0..repetitions)
        .into_par_iter()
        .map(|r| one(&mut key.stream(r as u64)))
        .collect::<Result<_>>()?;
    Ok(mean_se(&vals))
}

/// Runs the estimator with `K₁ = d` on `K₂` blocks of equicorrelated
/// Gaussians, `repetitions` times, and compares with the closed form.
/// Repetition `r` uses `key.stream(r)`.
pub fn gaussian_bias_experiment(d: usize, beta: f64, k2: usize, repetitions: usize, key: &StreamKey) -> Result<BiasPoint> {
    let sigma = equicorrelated(d, beta)?;
    let expected = expected_gaussian_estimate(d, 1, &sigma)?;
    let (empirical_mean, stderr) = repeat(repetitions, key, |rng| {
        let mut samples = vec![0.0; d * k2];
        for block in samples.chunks_exact_mut(d) {
            equicorrelated_draw(beta, block, rng);
        }
        Ok(estimate_tail_index(&samples, d, k2)?.inv_alpha_hat)
    })?;
    Ok(BiasPoint { beta, expected, empirical_mean, stderr, repetitions })
}

/// Mean estimate and SE over repetitions for i.i.d. standard Cauchy input.
pub fn cauchy_experiment(k1: usize, k2: usize, repetitions: usize, key: &StreamKey) -> Result<(f64, f64)> {
    repeat(repetitions, key, |rng| {
        let samples: Vec<f64> = (0..k1 * k2).map(|_| cauchy_draw(rng)).collect();
        Ok(estimate_tail_index(&samples, k1, k2)?.inv_alpha_hat)
    })
}

pub const BIAS_CSV_HEADER: &str = "beta,expected,empirical_mean,stderr,repetitions";

pub fn bias_csv(points: &[BiasPoint]) -> String {
    let mut s = format!("{BIAS_CSV_HEADER}\n");
    for p in points {
        let _ = writeln!(s, "{},{},{},{},{}", p.beta, p.expected, p.empirical_mean, p.stderr, p.repetitions);
    }
    s
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn constant_input_gives_one() {
        let r = estimate_tail_index(&vec![1.0; 50], 10, 5).unwrap();
        assert!((r.inv_alpha_hat - 1.0).abs() < 1e-15);
        assert_eq!(r.n_samples, 50);
    }

    #[test]
    fn input_validation() {
        assert!(estimate_tail_index(&[1.0; 6], 2, 2).is_err());
        assert!(estimate_tail_index(&[1.0; 4], 1, 4).is_err());
        assert!(matches!(estimate_tail_index(&[1.0, 0.0, 1.0, 1.0], 2, 2), Err(Error::Undefined(_))));
        assert!(expected_gaussian_estimate(1, 1, &Matrix::identity(1)).is_err());
        assert!(expected_gaussian_estimate(2, 1, &Matrix::from_diag(&[1.0, 0.0])).is_err());
        assert!(equicorrelated(3, 1.5).is_err());
    }

    #[test]
    fn closed_form_examples() {
        for (d, m) in [(2, 1), (10, 3), (100, 1)] {
            assert!((expected_gaussian_estimate(d, m, &Matrix::identity(d)).unwrap() - 0.5).abs() < 1e-15);
        }
        let e = |b: f64| expected_gaussian_estimate(100, 1, &equicorrelated(100, b).unwrap()).unwrap();
        assert!((e(1.0) - 1.0).abs() < 1e-14);
        assert!((e(0.5) - 0.5 * 5050f64.ln() / 100f64.ln()).abs() < 1e-14);
        assert!((e(0.5) - 0.9255).abs() < 1e-3);
    }

    #[test]
    fn gaussian_and_cauchy_monte_carlo() {
        let k = StreamKey::new(0, "tail");
        let p = gaussian_bias_experiment(20, 0.0, 200, 50, &k).unwrap();
        assert!(p.z() < 3.0, "{p:?}");
        let p = gaussian_bias_experiment(20, 1.0, 200, 50, &k).unwrap();
        assert!((p.empirical_mean - 1.0).abs() < 1e-12);
        let (m, se) = cauchy_experiment(50, 100, 50, &k).unwrap();
        assert!((m - 1.0).abs() < 3.0 * se, "{m} ± {se}");
    }

    #[test]
    fn csv_layout() {
        let p = BiasPoint { beta: 0.5, expected: 0.9, empirical_mean: 0.91, stderr: 0.01, repetitions: 3 };
        assert_eq!(bias_csv(&[p]), "beta,expected,empirical_mean,stderr,repetitions\n0.5,0.9,0.91,0.01,3\n");
    }

    mod props {
        use super::*;
        use proptest::prelude::*;

        proptest! {
            #[test]
            fn estimator_is_scale_invariant(
                v in proptest::collection::vec(prop_oneof![-5.0f64..-0.01, 0.01f64..5.0], 12),
                c in 0.01f64..100.0,
            ) {
                let a = estimate_tail_index(&v, 3, 4);
                let scaled: Vec<f64> = v.iter().map(|x| x * c).collect();
                let b = estimate_tail_index(&scaled, 3, 4);
                match (a, b) {
                    (Ok(a), Ok(b)) => {
                        prop_assert!((a.inv_alpha_hat - b.inv_alpha_hat).abs() < 1e-12);
                    }
                    (Err(_), Err(_)) => {}
                    _ => prop_assert!(false, "scaling changed validity"),
                }
            }

            #[test]
            fn identity_covariance_gives_one_half(d in 1usize..50, m in 1usize..50) {
                prop_assume!(d * m >= 2);
                let e = expected_gaussian_estimate(d, m, &Matrix::identity(d)).unwrap();
                prop_assert!((e - 0.5).abs() < 1e-14);
            }

            #[test]
            fn equicorrelated_expectation_is_monotone_in_half_one(d in 2usize..200, b1 in 0.0f64..1.0, b2 in 0.0f64..1.0) {
                let (lo, hi) = if b1 <= b2 { (b1, b2) } else { (b2, b1) };
                let e = |b: f64| expected_gaussian_estimate(d, 1, &equicorrelated(d, b).unwrap()).unwrap();
                let (a, b) = (e(lo), e(hi));
                prop_assert!(a <= b + 1e-14);
                prop_assert!(a >= 0.5 - 1e-14 && b <= 1.0 + 1e-14);
            }
        }
    }
}
