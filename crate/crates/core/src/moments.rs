//! One-step increment moments: Monte Carlo estimates with jackknife errors,
//! exact SVAG formulas, SDE / OU increment moments, and the comparison report.
//!
//! All moments are raw moments of `Δ = x₁ − x` (not central), which is what
//! the increment formulas describe.

use std::fmt::Write as _;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use statrs::function::erf::erfc;

use crate::error::{invalid, Result};
use crate::integrators::{DynamicsConfig, Integrator, IntegratorKind};
use crate::linalg::{Matrix, SymmetricEigen, Tensor3};
use crate::objectives::{QuadraticGaussianObjective, StochasticObjective};
use crate::rng::StreamKey;

/// Number of jackknife blocks.
pub const JACKKNIFE_BLOCKS: usize = 100;
/// Default z-score bound in [`compare_moments`].
pub const DEFAULT_Z_MAX: f64 = 4.0;
/// Largest dimension accepted by the moment estimator (third moments are dense).
pub const MAX_MOMENT_DIM: usize = 16;
/// Smallest sample count accepted by [`estimate_one_step_moments`].
pub const MIN_SAMPLES: usize = 10_000;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MomentEstimate {
    pub mean: Vec<f64>,
    pub second: Matrix,
    pub third: Tensor3,
    /// `√E|Δ^{⊗4}|² = √E|Δ|⁸`. `None` when no formula is available.
    pub fourth_norm: Option<f64>,
    /// 0 for theoretical moments.
    pub n_samples: usize,
    pub mean_se: Vec<f64>,
    pub second_se: Matrix,
    pub third_se: Tensor3,
    pub fourth_norm_se: Option<f64>,
}

impl MomentEstimate {
    /// Exact moments: all standard errors zero.
    pub fn exact(mean: Vec<f64>, second: Matrix, third: Tensor3, fourth_norm: Option<f64>) -> Self {
        let d = mean.len();
        Self {
            mean_se: vec![0.0; d],
            second_se: Matrix::zeros(d, d),
            third_se: Tensor3::zeros(d),
            fourth_norm_se: fourth_norm.map(|_| 0.0),
            mean,
            second,
            third,
            fourth_norm,
            n_samples: 0,
        }
    }

    pub fn dim(&self) -> usize {
        self.mean.len()
    }
}

/// Layout of the per-sample statistic vector: `Δ`, `Δ⊗Δ`, `Δ^{⊗3}`, `|Δ|⁸`.
struct Layout {
    d: usize,
}

impl Layout {
    fn len(&self) -> usize {
        self.d + self.d * self.d + self.d * self.d * self.d + 1
    }

    fn accumulate(&self, delta: &[f64], acc: &mut [f64]) {
        let d = self.d;
        let (m1, rest) = acc.split_at_mut(d);
        let (m2, rest) = rest.split_at_mut(d * d);
        let (m3, m4) = rest.split_at_mut(d * d * d);
        for i in 0..d {
            m1[i] += delta[i];
            for j in 0..d {
                let dij = delta[i] * delta[j];
                m2[i * d + j] += dij;
                let row = &mut m3[(i * d + j) * d..(i * d + j + 1) * d];
                for (r, dk) in row.iter_mut().zip(delta) {
                    *r += dij * dk;
                }
            }
        }
        let sq: f64 = delta.iter().map(|v| v * v).sum();
        m4[0] += sq * sq * sq * sq;
    }
}

/// Jackknife over blocks of a statistic `f` of the pooled means.
/// `blocks` holds per-block sums and counts.
fn jackknife(blocks: &[(Vec<f64>, usize)], f: impl Fn(&[f64]) -> f64) -> (f64, f64) {
    let k = blocks.len();
    let width = blocks[0].0.len();
    let n: usize = blocks.iter().map(|b| b.1).sum();
    let mut total = vec![0.0; width];
    for (s, _) in blocks {
        for (t, v) in total.iter_mut().zip(s) {
            *t += v;
        }
    }
    let full: Vec<f64> = total.iter().map(|t| t / n as f64).collect();
    let theta = f(&full);
    let loo: Vec<f64> = blocks
        .iter()
        .map(|(s, c)| {
            let m: Vec<f64> = total.iter().zip(s).map(|(t, v)| (t - v) / (n - c) as f64).collect();
            f(&m)
        })
        .collect();
    let bar = loo.iter().sum::<f64>() / k as f64;
    let var = (k as f64 - 1.0) / k as f64 * loo.iter().map(|t| (t - bar) * (t - bar)).sum::<f64>();
    (theta, var.sqrt())
}

/// Jackknife for many linear statistics at once (the leave-one-out mean of
/// each coordinate). Returns `(means, standard errors)`.
fn jackknife_linear(blocks: &[(Vec<f64>, usize)]) -> (Vec<f64>, Vec<f64>) {
    let k = blocks.len() as f64;
    let width = blocks[0].0.len();
    let n: usize = blocks.iter().map(|b| b.1).sum();
    let mut total = vec![0.0; width];
    for (s, _) in blocks {
        for (t, v) in total.iter_mut().zip(s) {
            *t += v;
        }
    }
    let mean: Vec<f64> = total.iter().map(|t| t / n as f64).collect();
    let loo: Vec<Vec<f64>> = blocks
        .iter()
        .map(|(s, c)| total.iter().zip(s).map(|(t, v)| (t - v) / (n - c) as f64).collect())
        .collect();
    let se = (0..width)
        .map(|i| {
            let bar = loo.iter().map(|v| v[i]).sum::<f64>() / k;
            let ss: f64 = loo.iter().map(|v| (v[i] - bar) * (v[i] - bar)).sum();
            ((k - 1.0) / k * ss).sqrt()
        })
        .collect();
    (mean, se)
}

fn block_sizes(n: usize) -> Vec<usize> {
    let base = n / JACKKNIFE_BLOCKS;
    let extra = n % JACKKNIFE_BLOCKS;
    (0..JACKKNIFE_BLOCKS).map(|b| base + usize::from(b < extra)).collect()
}

/// Monte Carlo moments of one update of `kind` (a single SVAG update of size
/// `η/l`, a single SGD step, or a single Euler–Maruyama substep) from `x`.
///
/// Blocks run in parallel on streams `key.stream(block)` and are reduced in
/// block order, so the result does not depend on the thread count.
pub fn estimate_one_step_moments(
    kind: IntegratorKind,
    obj: &dyn StochasticObjective,
    x: &[f64],
    cfg: &DynamicsConfig,
    n_samples: usize,
    key: &StreamKey,
) -> Result<MomentEstimate> {
    let d = obj.dim();
    if x.len() != d {
        return Err(crate::Error::DimensionMismatch { expected: d, got: x.len() });
    }
    if d > MAX_MOMENT_DIM {
        return Err(invalid(format!("moment estimation supports d ≤ {MAX_MOMENT_DIM}, got {d}")));
    }
    if n_samples < MIN_SAMPLES {
        return Err(invalid(format!("need at least {MIN_SAMPLES} samples, got {n_samples}")));
    }
    cfg.validate()?;
    let layout = Layout { d };
    let sizes = block_sizes(n_samples);
    let blocks: Vec<(Vec<f64>, usize)> = sizes
        .par_iter()
        .enumerate()
        .map(|(b, &count)| -> Result<(Vec<f64>, usize)> {
            let mut rng = key.stream(b as u64);
            let mut stepper = Integrator::new(obj, kind, cfg)?;
            let mut acc = vec![0.0; layout.len()];
            let mut delta = vec![0.0; d];
            for _ in 0..count {
                let next = stepper.update(x, &mut rng)?;
                for i in 0..d {
                    delta[i] = next[i] - x[i];
                }
                layout.accumulate(&delta, &mut acc);
            }
            Ok((acc, count))
        })
        .collect::<Result<_>>()?;

    let (means, ses) = jackknife_linear(&blocks);
    let s2 = d + d * d;
    let s3 = s2 + d * d * d;
    let (fourth, fourth_se) = jackknife(&blocks, |m| m[s3].max(0.0).sqrt());
    Ok(MomentEstimate {
        mean: means[..d].to_vec(),
        second: Matrix::from_row_major(d, d, means[d..s2].to_vec())?,
        third: Tensor3::from_data(d, means[s2..s3].to_vec())?,
        fourth_norm: Some(fourth),
        n_samples,
        mean_se: ses[..d].to_vec(),
        second_se: Matrix::from_row_major(d, d, ses[d..s2].to_vec())?,
        third_se: Tensor3::from_data(d, ses[s2..s3].to_vec())?,
        fourth_norm_se: Some(fourth_se),
    })
}

/// `∇L(x) + λx`, the deterministic part of every update.
fn drift(obj: &dyn StochasticObjective, x: &[f64], lambda: f64) -> Result<Vec<f64>> {
    let mut g = obj.expected_gradient(x)?;
    for (gi, xi) in g.iter_mut().zip(x) {
        *gi += lambda * xi;
    }
    Ok(g)
}

/// Exact moments of one SVAG update of size `η/l`, with `g = ∇L(x) + λx`:
///
/// * mean `−(η/l) g`
/// * second `(η²/l) Σ + (η²/l²) g gᵀ`
/// * third `−(η³/l³) g^{⊗3} − 3(η³/l²) sym(g ⊗ Σ) − (η³/l²)((3 − 1/l)/2) Λ`
///
/// `Σ` and `Λ` are the covariance and third central moment of the batch
/// gradient. `l = 1` gives the SGD step.
pub fn theoretical_svag_moments(obj: &dyn StochasticObjective, x: &[f64], cfg: &DynamicsConfig) -> Result<MomentEstimate> {
    cfg.validate()?;
    let l = cfg.svag_l as f64;
    let eta = cfg.eta;
    let h = eta / l;
    let g = drift(obj, x, cfg.lambda)?;
    let sigma = obj.noise_covariance(x, cfg.batch)?;
    let lambda3 = obj.noise_third_moment(x, cfg.batch)?.tensor;

    let mean: Vec<f64> = g.iter().map(|v| -h * v).collect();
    let mut second = sigma.scaled(eta * eta / l);
    second.add_outer(h * h, &g);
    let mut third = Tensor3::cube(&g).scaled(-h * h * h);
    third.add_scaled(-3.0 * eta.powi(3) / (l * l), &Tensor3::sym_vec_mat(&g, &sigma));
    third.add_scaled(-eta.powi(3) / (l * l) * (3.0 - 1.0 / l) / 2.0, &lambda3);
    Ok(MomentEstimate::exact(mean, second, third, None))
}

/// Leading-order moments of the SDE increment over time `h = η/l`:
/// mean `−h g`, second `hηΣ`, third `0`, and `fourth_norm` of the Gaussian
/// `N(0, hηΣ)`. Each neglected term is `O(l⁻²)`.
pub fn theoretical_sde_moments(obj: &dyn StochasticObjective, x: &[f64], cfg: &DynamicsConfig) -> Result<MomentEstimate> {
    cfg.validate()?;
    let h = cfg.eta / cfg.svag_l as f64;
    let g = drift(obj, x, cfg.lambda)?;
    let cov = obj.noise_covariance(x, cfg.batch)?.scaled(h * cfg.eta);
    let d = g.len();
    let fourth = gaussian_norm_moment8(&vec![0.0; d], &cov)?.sqrt();
    Ok(MomentEstimate::exact(g.iter().map(|v| -h * v).collect(), cov, Tensor3::zeros(d), Some(fourth)))
}

/// Exact moments of the OU increment `X_h − x` over `h = η/l`, including
/// weight decay (the drift matrix becomes `A + λI`).
pub fn ou_increment_moments(q: &QuadraticGaussianObjective, x: &[f64], cfg: &DynamicsConfig) -> Result<MomentEstimate> {
    cfg.validate()?;
    let h = cfg.eta / cfg.svag_l as f64;
    let shifted;
    let q = if cfg.lambda > 0.0 {
        let mut a = q.a().clone();
        for i in 0..a.rows() {
            a[(i, i)] += cfg.lambda;
        }
        shifted = QuadraticGaussianObjective::new(a, q.b_mean().to_vec(), q.s().clone())?;
        &shifted
    } else {
        q
    };
    let mut law = q.ou_law(x, h, cfg.eta, cfg.batch)?;
    for (m, xi) in law.mean.iter_mut().zip(x) {
        *m -= xi;
    }
    let fourth = gaussian_norm_moment8(&law.mean, &law.covariance)?.sqrt();
    Ok(MomentEstimate::exact(law.mean.clone(), law.second_raw_moment(), law.third_raw_moment(), Some(fourth)))
}

/// `E|Y|⁸` for `Y ~ N(m, C)`, from the cumulants of the noncentral quadratic
/// form `|Y|²`: `κ_r = 2^{r−1}(r−1)! Σ_i c_i^{r−1}(c_i + r μ_i²)` with `c_i`
/// the eigenvalues of `C` and `μ` the mean in its eigenbasis.
pub fn gaussian_norm_moment8(mean: &[f64], cov: &Matrix) -> Result<f64> {
    let eig = SymmetricEigen::new(cov)?;
    let mu = eig.vectors.tr_matvec(mean);
    let fact = [1.0, 1.0, 2.0, 6.0];
    let kappa = |r: usize| -> f64 {
        let s: f64 = eig
            .values
            .iter()
            .zip(&mu)
            .map(|(&c, &m)| {
                let c = c.max(0.0);
                c.powi(r as i32 - 1) * (c + r as f64 * m * m)
            })
            .sum();
        2f64.powi(r as i32 - 1) * fact[r - 1] * s
    };
    let (k1, k2, k3, k4) = (kappa(1), kappa(2), kappa(3), kappa(4));
    Ok(k1.powi(4) + 6.0 * k1 * k1 * k2 + 4.0 * k1 * k3 + 3.0 * k2 * k2 + k4)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OrderVerdict {
    /// 1, 2, 3, or 4 (`fourth_norm`).
    pub order: u8,
    pub max_abs_z: f64,
    /// Index of the worst entry, e.g. `[0,2,1]`.
    pub worst_entry: Vec<usize>,
    pub entries: usize,
    pub pass: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MomentReport {
    pub estimated: MomentEstimate,
    pub theoretical: MomentEstimate,
    pub z_max: f64,
    pub orders: Vec<OrderVerdict>,
    pub pass: bool,
    pub note: String,
}

/// Floor on standard errors relative to the magnitude of the entries, so that
/// exactly deterministic estimates compare up to rounding.
const SE_FLOOR: f64 = 1e-10;

fn order_verdict(order: u8, est: &[f64], se: &[f64], theory: &[f64], d: usize, z_max: f64) -> OrderVerdict {
    let scale = est.iter().chain(theory).fold(0.0f64, |m, v| m.max(v.abs()));
    let floor = SE_FLOOR * scale + f64::MIN_POSITIVE;
    let mut worst = (0.0f64, 0usize);
    for (i, ((e, s), t)) in est.iter().zip(se).zip(theory).enumerate() {
        let z = (e - t).abs() / s.max(floor);
        if z > worst.0 || z.is_nan() {
            worst = (if z.is_nan() { f64::INFINITY } else { z }, i);
        }
    }
    let rank = match order {
        1 => 1,
        2 => 2,
        3 => 3,
        _ => 0,
    };
    let mut idx = Vec::with_capacity(rank);
    let mut rem = worst.1;
    for p in (0..rank).rev() {
        let stride = d.pow(p as u32);
        idx.push(rem / stride);
        rem %= stride;
    }
    OrderVerdict { order, max_abs_z: worst.0, worst_entry: idx, entries: est.len(), pass: worst.0 <= z_max }
}

/// Per-entry z-scores `(est − theory)/SE` for orders 1–3, plus `fourth_norm`
/// when the theory provides it. Passes iff every `|z| ≤ z_max`.
pub fn compare_moments(est: &MomentEstimate, theory: &MomentEstimate, z_max: f64) -> Result<MomentReport> {
    let d = est.dim();
    if theory.dim() != d {
        return Err(crate::Error::DimensionMismatch { expected: d, got: theory.dim() });
    }
    if !(z_max > 0.0) {
        return Err(invalid("z_max must be positive"));
    }
    let mut orders = vec![
        order_verdict(1, &est.mean, &est.mean_se, &theory.mean, d, z_max),
        order_verdict(2, est.second.as_slice(), est.second_se.as_slice(), theory.second.as_slice(), d, z_max),
        order_verdict(3, est.third.as_slice(), est.third_se.as_slice(), theory.third.as_slice(), d, z_max),
    ];
    if let (Some(e), Some(t)) = (est.fourth_norm, theory.fourth_norm) {
        let se = est.fourth_norm_se.unwrap_or(0.0);
        orders.push(order_verdict(4, &[e], &[se], &[t], d, z_max));
    }
    let entries: usize = orders.iter().map(|o| o.entries).sum();
    let per_entry = two_sided_normal_tail(z_max);
    let note = format!(
        "{entries} entries tested at |z| ≤ {z_max}; per-entry two-sided level {per_entry:.1e}, \
         Bonferroni family-wise bound {:.1e} (entries of symmetric tensors are not independent)",
        (per_entry * entries as f64).min(1.0)
    );
    let pass = orders.iter().all(|o| o.pass);
    Ok(MomentReport { estimated: est.clone(), theoretical: theory.clone(), z_max, orders, pass, note })
}

/// `P(|Z| > z)` for a standard normal.
fn two_sided_normal_tail(z: f64) -> f64 {
    erfc(z / std::f64::consts::SQRT_2)
}

impl MomentReport {
    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    /// Human-readable summary, one line per order.
    pub fn table(&self) -> String {
        let mut s = String::from("order  entries  max|z|    worst        verdict\n");
        for o in &self.orders {
            let name = if o.order == 4 { "4*".to_string() } else { o.order.to_string() };
            let _ = writeln!(
                s,
                "{name:<6} {:<8} {:<9.3} {:<12} {}",
                o.entries,
                o.max_abs_z,
                format!("{:?}", o.worst_entry),
                if o.pass { "pass" } else { "FAIL" }
            );
        }
        let _ = writeln!(s, "(4* = fourth_norm)  {}", self.note);
        s
    }
}

/// Mean, variance and third central moment of scalar samples with jackknife
/// standard errors over [`JACKKNIFE_BLOCKS`] consecutive blocks.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ScalarMoments {
    pub n: usize,
    pub mean: f64,
    pub mean_se: f64,
    pub variance: f64,
    pub variance_se: f64,
    pub third_central: f64,
    pub third_central_se: f64,
}

pub fn scalar_moments(samples: &[f64]) -> Result<ScalarMoments> {
    let n = samples.len();
    if n < JACKKNIFE_BLOCKS * 3 {
        return Err(crate::Error::Insufficient(format!("need at least {} samples, got {n}", JACKKNIFE_BLOCKS * 3)));
    }
    if samples.iter().any(|v| !v.is_finite()) {
        return Err(crate::Error::NonFinite("samples"));
    }
    // Shift by the mean to avoid cancellation in the power sums.
    let shift = samples.iter().sum::<f64>() / n as f64;
    let mut blocks = Vec::with_capacity(JACKKNIFE_BLOCKS);
    let mut start = 0;
    for count in block_sizes(n) {
        let mut s = vec![0.0; 3];
        for v in &samples[start..start + count] {
            let y = v - shift;
            s[0] += y;
            s[1] += y * y;
            s[2] += y * y * y;
        }
        blocks.push((s, count));
        start += count;
    }
    let mean = |m: &[f64]| m[0] + shift;
    let var = |m: &[f64]| m[1] - m[0] * m[0];
    let third = |m: &[f64]| m[2] - 3.0 * m[0] * m[1] + 2.0 * m[0].powi(3);
    let (mu, mu_se) = jackknife(&blocks, mean);
    let (v, v_se) = jackknife(&blocks, var);
    let (t, t_se) = jackknife(&blocks, third);
    let nf = n as f64;
    // Small-sample corrections to the plug-in central moments.
    Ok(ScalarMoments {
        n,
        mean: mu,
        mean_se: mu_se,
        variance: v * nf / (nf - 1.0),
        variance_se: v_se,
        third_central: t * nf * nf / ((nf - 1.0) * (nf - 2.0)),
        third_central_se: t_se,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::objectives::{BatchSize, PoissonLinearObjective};

    fn quad() -> QuadraticGaussianObjective {
        let a = Matrix::from_rows(&[vec![2.0, 0.3, 0.0], vec![0.3, 1.0, 0.1], vec![0.0, 0.1, 0.5]]).unwrap();
        let s = Matrix::from_rows(&[vec![1.0, 0.2, 0.0], vec![0.2, 2.0, -0.3], vec![0.0, -0.3, 3.0]]).unwrap();
        QuadraticGaussianObjective::new(a, vec![0.5, -1.0, 0.0], s).unwrap()
    }

    fn cfg(eta: f64, l: u32) -> DynamicsConfig {
        let mut c = DynamicsConfig::new(eta, 1);
        c.svag_l = l;
        c
    }

    #[test]
    fn deterministic_gd_is_exact() {
        let q = QuadraticGaussianObjective::diagonal(&[1.0, 2.0], vec![0.5, 0.0], &[0.0, 0.0]).unwrap();
        let x = [1.0, -1.0];
        let c = cfg(0.1, 1);
        let est = estimate_one_step_moments(IntegratorKind::Sgd, &q, &x, &c, 10_000, &StreamKey::new(0, "m")).unwrap();
        assert!((est.mean[0] + 0.05).abs() < 1e-15);
        assert!((est.mean[1] - 0.2).abs() < 1e-15);
        assert!(est.mean_se.iter().all(|s| *s < 1e-13));
        // central second moment vanishes
        let central = est.second[(0, 1)] - est.mean[0] * est.mean[1];
        assert!(central.abs() < 1e-15);
        let th = theoretical_svag_moments(&q, &x, &c).unwrap();
        assert!(compare_moments(&est, &th, 4.0).unwrap().pass);
    }

    #[test]
    fn identical_moments_have_zero_z() {
        let th = theoretical_svag_moments(&quad(), &[1.0, 1.0, 1.0], &cfg(0.1, 2)).unwrap();
        let r = compare_moments(&th, &th, 4.0).unwrap();
        assert!(r.pass);
        assert!(r.orders.iter().all(|o| o.max_abs_z == 0.0));
    }

    #[test]
    fn svag_formula_special_cases() {
        let q = quad();
        let x = [1.0, -0.5, 2.0];
        let c = cfg(0.1, 1);
        let th = theoretical_svag_moments(&q, &x, &c).unwrap();
        let g = q.expected_gradient(&x).unwrap();
        let sigma = q.s().clone();
        // l=1, Λ=0: second = η²(Σ + g gᵀ), third = −η³(3 sym(g⊗Σ) + g³).
        let mut second = sigma.scaled(0.01);
        second.add_outer(0.01, &g);
        assert!(th.second.max_abs_diff(&second) < 1e-15);
        let mut third = Tensor3::sym_vec_mat(&g, &sigma).scaled(3.0);
        third.add_scaled(1.0, &Tensor3::cube(&g));
        assert!(th.third.max_abs_diff(&third.scaled(-0.001)) < 1e-15);

        // critical point
        let xs = q.stationary_mean().unwrap();
        let t8 = theoretical_svag_moments(&q, &xs, &cfg(0.1, 8)).unwrap();
        assert!(t8.mean.iter().all(|v| v.abs() < 1e-14));
        assert!(t8.second.max_abs_diff(&sigma.scaled(0.01 / 8.0)) < 1e-15);
    }

    #[test]
    fn svag_large_l_limits() {
        let p = PoissonLinearObjective::new(1.0).unwrap();
        let eta = 0.1;
        for l in [1_000u32, 100_000] {
            let t = theoretical_svag_moments(&p, &[0.0], &cfg(eta, l)).unwrap();
            let lf = l as f64;
            assert!((t.second[(0, 0)] * lf - eta * eta).abs() < 2.0 * eta * eta / lf);
            // third·l² → −(3/2)η³Λ − 3η³ g Σ with g = Σ = Λ = 1
            let lim = -(1.5 + 3.0) * eta.powi(3);
            assert!((t.third[(0, 0, 0)] * lf * lf - lim).abs() < 10.0 * eta.powi(3) / lf);
        }
    }

    #[test]
    fn svag_and_sde_second_moments_differ_at_order_l_minus_two() {
        let q = quad();
        let x = [1.0, -0.5, 2.0];
        let cs: Vec<f64> = [2u32, 4, 8, 16]
            .iter()
            .map(|&l| {
                let a = theoretical_svag_moments(&q, &x, &cfg(0.1, l)).unwrap();
                let b = theoretical_sde_moments(&q, &x, &cfg(0.1, l)).unwrap();
                let mut diff = a.second.clone();
                diff.add_scaled(-1.0, &b.second);
                diff.frobenius_norm() * (l * l) as f64
            })
            .collect();
        for c in &cs {
            assert!((c / cs[0] - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn ou_increment_leading_terms() {
        let q = quad();
        let x = [1.0, -0.5, 2.0];
        let g = q.expected_gradient(&x).unwrap();
        let mut prev = f64::INFINITY;
        for l in [4u32, 16, 64, 256] {
            let c = cfg(0.1, l);
            let h = 0.1 / l as f64;
            let exact = ou_increment_moments(&q, &x, &c).unwrap();
            let lead = theoretical_sde_moments(&q, &x, &c).unwrap();
            // mean error O(h²), covariance error O(h²)
            let mean_err: f64 = exact.mean.iter().zip(&lead.mean).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
            assert!(mean_err < 2.0 * h * h * 10.0);
            let mut cov = exact.second.clone();
            cov.add_outer(-1.0, &exact.mean);
            assert!(cov.max_abs_diff(&lead.second) < 10.0 * h * h * 0.1);
            // third raw moment is o(h)
            let ratio = exact.third.max_abs() / h;
            assert!(ratio < prev);
            prev = ratio;
            assert!(exact.mean.iter().zip(&g).all(|(m, gi)| (m + h * gi).abs() <= 20.0 * h * h));
        }
    }

    #[test]
    fn eighth_moment_of_gaussian_norm() {
        // 1-D N(0,1): E z⁸ = 105; N(μ,0): μ⁸.
        assert!((gaussian_norm_moment8(&[0.0], &Matrix::identity(1)).unwrap() - 105.0).abs() < 1e-9);
        assert!((gaussian_norm_moment8(&[2.0], &Matrix::zeros(1, 1)).unwrap() - 256.0).abs() < 1e-9);
        // 2-D standard: |Y|² ~ χ²₂ with E Q⁴ = 2·4·6·8 = 384.
        assert!((gaussian_norm_moment8(&[0.0, 0.0], &Matrix::identity(2)).unwrap() - 384.0).abs() < 1e-9);
        // 1-D N(1,1): E (1+z)⁸ = Σ C(8,2k)(2k−1)!! = 1+28+210+420+105 = 764.
        assert!((gaussian_norm_moment8(&[1.0], &Matrix::identity(1)).unwrap() - 764.0).abs() < 1e-9);
    }

    #[test]
    fn svag_mean_and_poisson_third_moment_by_monte_carlo() {
        let q = quad();
        let x = [1.0, -0.5, 2.0];
        let c = cfg(0.1, 4);
        let est = estimate_one_step_moments(IntegratorKind::Svag, &q, &x, &c, 200_000, &StreamKey::new(3, "m")).unwrap();
        let th = theoretical_svag_moments(&q, &x, &c).unwrap();
        let r = compare_moments(&est, &th, 4.0).unwrap();
        assert!(r.pass, "{}", r.table());

        let p = PoissonLinearObjective::new(1.0).unwrap();
        let c = cfg(0.1, 2);
        let est = estimate_one_step_moments(IntegratorKind::Svag, &p, &[0.0], &c, 400_000, &StreamKey::new(4, "m")).unwrap();
        let th = theoretical_svag_moments(&p, &[0.0], &c).unwrap();
        let r = compare_moments(&est, &th, 4.0).unwrap();
        assert!(r.pass, "{}", r.table());
        assert_eq!(r.orders.len(), 3);
    }

    #[test]
    fn em_increment_third_moment_is_small_o_of_h() {
        let q = quad();
        let x = [1.0, -0.5, 2.0];
        let g = q.expected_gradient(&x).unwrap();
        let eta = 0.1;
        for sub in [2.0, 8.0] {
            let mut c = cfg(eta, 1);
            c.substep = Some(eta / sub);
            let h = eta / sub;
            let est = estimate_one_step_moments(IntegratorKind::Ngd, &q, &x, &c, 200_000, &StreamKey::new(5, "em")).unwrap();
            // EM increment N(−hg, hηΣ): third raw = −h³g³ − 3h²η sym(g⊗Σ).
            let mut th3 = Tensor3::cube(&g).scaled(-h.powi(3));
            th3.add_scaled(-3.0 * h * h * eta, &Tensor3::sym_vec_mat(&g, q.s()));
            let worst = est
                .third
                .as_slice()
                .iter()
                .zip(th3.as_slice())
                .zip(est.third_se.as_slice())
                .map(|((e, t), s)| (e - t).abs() / s)
                .fold(0.0, f64::max);
            assert!(worst < 4.0, "z = {worst}");
            assert!(th3.max_abs() / h < 1.0 * h * 100.0);
        }
    }

    #[test]
    fn corrupted_covariance_is_detected() {
        let q = quad();
        let bad = QuadraticGaussianObjective::new(q.a().clone(), q.b_mean().to_vec(), q.s().scaled(1.1)).unwrap();
        let x = [1.0, -0.5, 2.0];
        let c = cfg(0.1, 8);
        let est = estimate_one_step_moments(IntegratorKind::Svag, &q, &x, &c, 1_000_000, &StreamKey::new(6, "m")).unwrap();
        let th = theoretical_svag_moments(&bad, &x, &c).unwrap();
        let r = compare_moments(&est, &th, 4.0).unwrap();
        assert!(!r.orders[1].pass);
    }

    #[test]
    fn estimator_is_deterministic() {
        let p = PoissonLinearObjective::new(2.0).unwrap();
        let c = cfg(0.1, 3);
        let k = StreamKey::new(7, "det");
        let a = estimate_one_step_moments(IntegratorKind::Svag, &p, &[0.0], &c, 10_000, &k).unwrap();
        let b = estimate_one_step_moments(IntegratorKind::Svag, &p, &[0.0], &c, 10_000, &k).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn rejects_small_samples_and_large_dims() {
        let p = PoissonLinearObjective::new(1.0).unwrap();
        let k = StreamKey::new(0, "x");
        assert!(estimate_one_step_moments(IntegratorKind::Sgd, &p, &[0.0], &cfg(0.1, 1), 100, &k).is_err());
        let q = QuadraticGaussianObjective::diagonal(&[1.0; 17], vec![0.0; 17], &[1.0; 17]).unwrap();
        assert!(estimate_one_step_moments(IntegratorKind::Sgd, &q, &[0.0; 17], &cfg(0.1, 1), 10_000, &k).is_err());
    }

    #[test]
    fn scalar_moments_of_a_known_sample() {
        // Shifted exponential-like deterministic sample with known moments.
        let v: Vec<f64> = (0..1000).map(|i| (i % 10) as f64).collect();
        let m = scalar_moments(&v).unwrap();
        assert!((m.mean - 4.5).abs() < 1e-12);
        assert!((m.variance - 8.25 * 1000.0 / 999.0).abs() < 1e-9);
        assert!(m.third_central.abs() < 1e-9);
        assert!(scalar_moments(&v[..10]).is_err());
    }

    #[test]
    fn normal_tail() {
        assert!((two_sided_normal_tail(1.959963984540054) - 0.05).abs() < 1e-9);
        assert!((two_sided_normal_tail(4.0) / 6.334248366623973e-5 - 1.0).abs() < 1e-10);
        assert!((two_sided_normal_tail(0.3) - 0.7641771556220953).abs() < 1e-12);
    }

    #[test]
    fn batch_size_enters_sigma_and_lambda() {
        let p = PoissonLinearObjective::new(1.0).unwrap();
        let mut c = cfg(0.1, 1);
        c.batch = BatchSize::new(2.0).unwrap();
        let t = theoretical_svag_moments(&p, &[0.0], &c).unwrap();
        assert!((t.second[(0, 0)] - 0.01 * 1.5).abs() < 1e-15);
        // −η³(g³ + 3gΣ + Λ) with g=1, Σ=1/2, Λ=1/4
        assert!((t.third[(0, 0, 0)] + 0.001 * (1.0 + 1.5 + 0.25)).abs() < 1e-15);
    }
}
