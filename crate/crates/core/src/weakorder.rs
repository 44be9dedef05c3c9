//! Weak error of SVAG against the Itô SDE as a function of `l`, and the
//! log-log order fit.

use std::fmt::Write as _;
use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, StudentsT};

use crate::error::{invalid, Error, Result};
use crate::integrators::{DynamicsConfig, Integrator, IntegratorKind};
use crate::linalg::Matrix;
use crate::objectives::{BatchSize, QuadraticGaussianObjective, SamplingMode, StochasticObjective};
use crate::rng::StreamKey;

/// Highest total degree accepted by [`PolynomialTestFunction`].
pub const MAX_DEGREE: u32 = 6;
/// Number of nonoverlapping batches used for Monte Carlo standard errors.
pub const SE_BATCHES: usize = 100;
/// A point enters the order fit only if its error exceeds this many SEs.
pub const SIGNAL_SE: f64 = 3.0;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Monomial {
    pub coef: f64,
    /// Exponent per coordinate.
    pub powers: Vec<u32>,
}

/// Multivariate polynomial of total degree at most 6.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawPolynomial")]
pub struct PolynomialTestFunction {
    dim: usize,
    terms: Vec<Monomial>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawPolynomial {
    dim: usize,
    terms: Vec<Monomial>,
}

impl TryFrom<RawPolynomial> for PolynomialTestFunction {
    type Error = Error;

    fn try_from(r: RawPolynomial) -> Result<Self> {
        Self::new(r.dim, r.terms)
    }
}

impl PolynomialTestFunction {
    pub fn new(dim: usize, terms: Vec<Monomial>) -> Result<Self> {
        if dim == 0 {
            return Err(invalid("polynomial dimension must be ≥ 1"));
        }
        for t in &terms {
            if t.powers.len() != dim {
                return Err(Error::DimensionMismatch { expected: dim, got: t.powers.len() });
            }
            let deg: u32 = t.powers.iter().sum();
            if deg > MAX_DEGREE {
                return Err(invalid(format!("test function degree {deg} exceeds {MAX_DEGREE}")));
            }
            if !t.coef.is_finite() {
                return Err(Error::NonFinite("polynomial coefficient"));
            }
        }
        Ok(Self { dim, terms })
    }

    pub fn constant(dim: usize, c: f64) -> Result<Self> {
        Self::new(dim, vec![Monomial { coef: c, powers: vec![0; dim] }])
    }

    /// `x_i^power`.
    pub fn coordinate_power(dim: usize, i: usize, power: u32) -> Result<Self> {
        if i >= dim {
            return Err(invalid(format!("coordinate {i} out of range for dimension {dim}")));
        }
        let mut powers = vec![0; dim];
        powers[i] = power;
        Self::new(dim, vec![Monomial { coef: 1.0, powers }])
    }

    /// `|x|²`.
    pub fn squared_norm(dim: usize) -> Result<Self> {
        let terms = (0..dim)
            .map(|i| {
                let mut powers = vec![0; dim];
                powers[i] = 2;
                Monomial { coef: 1.0, powers }
            })
            .collect();
        Self::new(dim, terms)
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn terms(&self) -> &[Monomial] {
        &self.terms
    }

    pub fn degree(&self) -> u32 {
        self.terms.iter().map(|t| t.powers.iter().sum()).max().unwrap_or(0)
    }

    pub fn evaluate(&self, x: &[f64]) -> f64 {
        self.terms
            .iter()
            .map(|t| t.coef * t.powers.iter().zip(x).map(|(&p, &v)| v.powi(p as i32)).product::<f64>())
            .sum()
    }

    /// `E g(X)` for `X ~ N(mean, cov)`.
    pub fn gaussian_expectation(&self, mean: &[f64], cov: &Matrix) -> Result<f64> {
        if mean.len() != self.dim || cov.rows() != self.dim || cov.cols() != self.dim {
            return Err(Error::DimensionMismatch { expected: self.dim, got: mean.len() });
        }
        let mut total = 0.0;
        for t in &self.terms {
            let factors: Vec<usize> = t.powers.iter().enumerate().flat_map(|(i, &p)| std::iter::repeat_n(i, p as usize)).collect();
            total += t.coef * gaussian_product_moment(&factors, mean, cov);
        }
        Ok(total)
    }
}

/// `E Π_j X_{a_j}` for Gaussian `X`, by the recursion
/// `E[X_f R] = μ_f E[R] + Σ_j C_{f a_j} E[R ∖ a_j]`.
fn gaussian_product_moment(factors: &[usize], mean: &[f64], cov: &Matrix) -> f64 {
    let Some((&f, rest)) = factors.split_first() else {
        return 1.0;
    };
    let mut s = mean[f] * gaussian_product_moment(rest, mean, cov);
    for j in 0..rest.len() {
        let c = cov[(f, rest[j])];
        if c != 0.0 {
            let mut reduced = rest.to_vec();
            reduced.remove(j);
            s += c * gaussian_product_moment(&reduced, mean, cov);
        }
    }
    s
}

/// `E g(X_T)` for the OU process `dX = −(AX − b)dt + (ηS/B)^{1/2} dW`, `X_0 = x0`.
pub fn analytic_ou_expectation(
    q: &QuadraticGaussianObjective,
    g: &PolynomialTestFunction,
    x0: &[f64],
    horizon: f64,
    eta: f64,
    batch: BatchSize,
) -> Result<f64> {
    let law = q.ou_law(x0, horizon, eta, batch)?;
    g.gaussian_expectation(&law.mean, &law.covariance)
}

/// Source of `E g(X_T)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case", tag = "kind")]
pub enum Reference {
    /// Known value (e.g. from [`analytic_ou_expectation`]).
    Exact { value: f64 },
    /// Euler–Maruyama on the first-order SDE with substep `η/(50·l_max)` and
    /// `replica_factor` times as many replicas as the SVAG runs.
    FineEm { replica_factor: usize },
}

impl Default for Reference {
    fn default() -> Self {
        Self::FineEm { replica_factor: 4 }
    }
}

/// Ratio between the smallest SVAG step `η/l_max` and the reference substep.
pub const REFERENCE_REFINEMENT: f64 = 50.0;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct WeakOrderSetup {
    pub x0: Vec<f64>,
    pub horizon: f64,
    pub eta: f64,
    #[serde(default)]
    pub lambda: f64,
    #[serde(default)]
    pub batch: BatchSize,
    #[serde(default)]
    pub mode: SamplingMode,
    pub l_values: Vec<u32>,
    pub replicas: usize,
}

impl WeakOrderSetup {
    pub fn validate(&self) -> Result<()> {
        if !(self.horizon.is_finite() && self.horizon > 0.0) {
            return Err(invalid(format!("horizon T must be positive, got {}", self.horizon)));
        }
        if self.l_values.is_empty() {
            return Err(invalid("l_values must not be empty"));
        }
        for &l in &self.l_values {
            if l < 1 {
                return Err(invalid("SVAG parameter l ≥ 1 required"));
            }
            if self.updates(l) < 1 {
                return Err(invalid(format!("⌊lT/η⌋ must be ≥ 1, got 0 for l = {l}")));
            }
        }
        if self.replicas < 2 * SE_BATCHES {
            return Err(invalid(format!("need at least {} replicas, got {}", 2 * SE_BATCHES, self.replicas)));
        }
        self.config(1).validate()
    }

    /// Number of SVAG updates `⌊lT/η⌋`.
    pub fn updates(&self, l: u32) -> u64 {
        (l as f64 * self.horizon / self.eta + 1e-9).floor() as u64
    }

    fn config(&self, l: u32) -> DynamicsConfig {
        let mut cfg = DynamicsConfig::new(self.eta, 0);
        cfg.lambda = self.lambda;
        cfg.batch = self.batch;
        cfg.mode = self.mode;
        cfg.svag_l = l;
        cfg
    }
}

/// Mean of `g` over replicas with a batch-means standard error.
fn replica_mean(
    replicas: usize,
    key: &StreamKey,
    run: impl Fn(&mut crate::rng::StreamRng) -> Result<f64> + Sync,
) -> Result<(f64, f64)> {
    let base = replicas / SE_BATCHES;
    let extra = replicas % SE_BATCHES;
    let batch_sums: Vec<(f64, usize)> = (0..SE_BATCHES)
        .into_par_iter()
        .map(|b| -> Result<(f64, usize)> {
            let count = base + usize::from(b < extra);
            let start = b * base + b.min(extra);
            let mut s = 0.0;
            for r in start..start + count {
                let mut rng = key.stream(r as u64);
                s += run(&mut rng)?;
            }
            Ok((s, count))
        })
        .collect::<Result<_>>()?;
    let total: f64 = batch_sums.iter().map(|b| b.0).sum();
    let mean = total / replicas as f64;
    let means: Vec<f64> = batch_sums.iter().map(|(s, c)| s / *c as f64).collect();
    let k = means.len() as f64;
    let bar = means.iter().sum::<f64>() / k;
    let var = means.iter().map(|m| (m - bar) * (m - bar)).sum::<f64>() / (k - 1.0);
    Ok((mean, (var / k).sqrt()))
}

fn final_value(
    obj: &dyn StochasticObjective,
    kind: IntegratorKind,
    cfg: &DynamicsConfig,
    x0: &[f64],
    updates: u64,
    g: &PolynomialTestFunction,
    rng: &mut crate::rng::StreamRng,
) -> Result<f64> {
    let mut stepper = Integrator::new(obj, kind, cfg)?;
    let mut x = x0.to_vec();
    for _ in 0..updates {
        x = stepper.update(&x, rng)?;
    }
    if !x.iter().all(|v| v.is_finite()) {
        return Err(Error::NonFinite("iterate"));
    }
    Ok(g.evaluate(&x))
}

/// `E g(X_T)` from fine-step Euler–Maruyama.
pub fn fine_em_reference(
    obj: &dyn StochasticObjective,
    g: &PolynomialTestFunction,
    setup: &WeakOrderSetup,
    replicas: usize,
    key: &StreamKey,
) -> Result<(f64, f64)> {
    setup.validate()?;
    let l_max = *setup.l_values.iter().max().expect("validated non-empty");
    let mut cfg = setup.config(1);
    let n = (setup.eta / (REFERENCE_REFINEMENT * l_max as f64)).recip().ceil();
    cfg.substep = Some(setup.eta / n);
    let updates = (setup.horizon / setup.eta * n).round() as u64;
    replica_mean(replicas, &key.child("reference"), |rng| {
        final_value(obj, IntegratorKind::Ngd, &cfg, &setup.x0, updates, g, rng)
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OrderFit {
    pub slope: f64,
    pub intercept: f64,
    pub slope_se: f64,
    pub ci_low: f64,
    pub ci_high: f64,
    pub points_used: usize,
}

impl OrderFit {
    pub fn ci_contains(&self, v: f64) -> bool {
        self.ci_low <= v && v <= self.ci_high
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WeakErrorCurve {
    pub l_values: Vec<u32>,
    /// `E g(x_{⌊lT/η⌋})` per `l`.
    pub estimates: Vec<f64>,
    pub errors: Vec<f64>,
    pub stderr: Vec<f64>,
    pub n_replicas: usize,
    pub reference: f64,
    pub reference_se: f64,
    pub fit: Option<OrderFit>,
    /// Why no fit was produced, if so.
    pub inconclusive: Option<String>,
}

pub const WEAK_ERROR_CSV_HEADER: &str = "l,error,stderr,n_replicas";

impl WeakErrorCurve {
    pub fn to_csv(&self) -> String {
        let mut s = format!("{WEAK_ERROR_CSV_HEADER}\n");
        for i in 0..self.l_values.len() {
            let _ = writeln!(s, "{},{},{},{}", self.l_values[i], self.errors[i], self.stderr[i], self.n_replicas);
        }
        s
    }

    pub fn summary_json(&self) -> Result<String> {
        let v = serde_json::json!({
            "l_values": self.l_values,
            "reference": self.reference,
            "reference_se": self.reference_se,
            "n_replicas": self.n_replicas,
            "slope": self.fit.map(|f| f.slope),
            "intercept": self.fit.map(|f| f.intercept),
            "slope_se": self.fit.map(|f| f.slope_se),
            "ci95": self.fit.map(|f| [f.ci_low, f.ci_high]),
            "points_used": self.fit.map(|f| f.points_used),
            "inconclusive": self.inconclusive,
        });
        Ok(serde_json::to_string_pretty(&v)?)
    }

    pub fn write(&self, dir: &Path, stem: &str) -> Result<()> {
        std::fs::write(dir.join(format!("{stem}.csv")), self.to_csv())?;
        std::fs::write(dir.join(format!("{stem}.json")), self.summary_json()?)?;
        Ok(())
    }
}

/// `|E g(x_{⌊lT/η⌋}) − E g(X_T)|` for each `l`, with the order fit.
///
/// SVAG replica `r` at parameter `l` draws from `key.child("l{l}").stream(r)`.
pub fn measure_weak_error(
    obj: &dyn StochasticObjective,
    g: &PolynomialTestFunction,
    setup: &WeakOrderSetup,
    reference: &Reference,
    key: &StreamKey,
) -> Result<WeakErrorCurve> {
    setup.validate()?;
    if g.dim() != obj.dim() || setup.x0.len() != obj.dim() {
        return Err(Error::DimensionMismatch { expected: obj.dim(), got: g.dim().max(setup.x0.len()) });
    }
    let (reference, reference_se) = match reference {
        Reference::Exact { value } => (*value, 0.0),
        Reference::FineEm { replica_factor } => {
            if *replica_factor < 1 {
                return Err(invalid("replica_factor must be ≥ 1"));
            }
            fine_em_reference(obj, g, setup, setup.replicas * replica_factor, key)?
        }
    };
    let mut estimates = Vec::new();
    let mut errors = Vec::new();
    let mut stderr = Vec::new();
    for &l in &setup.l_values {
        let cfg = setup.config(l);
        let updates = setup.updates(l);
        let (m, se) = replica_mean(setup.replicas, &key.child(format!("l{l}")), |rng| {
            final_value(obj, IntegratorKind::Svag, &cfg, &setup.x0, updates, g, rng)
        })?;
        estimates.push(m);
        errors.push((m - reference).abs());
        stderr.push(se.hypot(reference_se));
    }
    let mut curve = WeakErrorCurve {
        l_values: setup.l_values.clone(),
        estimates,
        errors,
        stderr,
        n_replicas: setup.replicas,
        reference,
        reference_se,
        fit: None,
        inconclusive: None,
    };
    match fit_order(&curve) {
        Ok(f) => curve.fit = Some(f),
        Err(Error::Insufficient(msg)) => curve.inconclusive = Some(msg),
        Err(e) => return Err(e),
    }
    Ok(curve)
}

/// Weighted least squares of `log error` on `log l` over points with
/// `error > 3·SE`, weights `(error/SE)²` (the inverse variance of
/// `log error`). With zero standard errors the fit is unweighted. The slope
/// SE is inflated by the reduced χ² when that exceeds 1; the interval uses
/// Student's t with `n − 2` degrees of freedom.
pub fn fit_order(curve: &WeakErrorCurve) -> Result<OrderFit> {
    let pts: Vec<(f64, f64, f64)> = curve
        .l_values
        .iter()
        .zip(&curve.errors)
        .zip(&curve.stderr)
        .filter(|((_, &e), &s)| e > 0.0 && e > SIGNAL_SE * s)
        .map(|((&l, &e), &s)| (l as f64, e, s))
        .collect();
    if pts.len() < 3 {
        return Err(Error::Insufficient(format!(
            "only {} of {} points have error > {SIGNAL_SE}·SE; need 3",
            pts.len(),
            curve.l_values.len()
        )));
    }
    let deterministic = pts.iter().all(|p| p.2 == 0.0);
    let xs: Vec<f64> = pts.iter().map(|p| p.0.ln()).collect();
    let ys: Vec<f64> = pts.iter().map(|p| p.1.ln()).collect();
    let ws: Vec<f64> = pts
        .iter()
        .map(|p| if deterministic { 1.0 } else { (p.1 / p.2.max(1e-12 * p.1)).powi(2) })
        .collect();
    let n = pts.len();
    let sw: f64 = ws.iter().sum();
    let xbar = ws.iter().zip(&xs).map(|(w, x)| w * x).sum::<f64>() / sw;
    let ybar = ws.iter().zip(&ys).map(|(w, y)| w * y).sum::<f64>() / sw;
    let sxx: f64 = ws.iter().zip(&xs).map(|(w, x)| w * (x - xbar).powi(2)).sum();
    if sxx <= 0.0 {
        return Err(invalid("order fit needs at least two distinct l values"));
    }
    let sxy: f64 = (0..n).map(|i| ws[i] * (xs[i] - xbar) * (ys[i] - ybar)).sum();
    let slope = sxy / sxx;
    let intercept = ybar - slope * xbar;
    let chi2: f64 = (0..n).map(|i| ws[i] * (ys[i] - intercept - slope * xs[i]).powi(2)).sum();
    let dof = (n - 2) as f64;
    let scale = if deterministic { chi2 / dof } else { (chi2 / dof).max(1.0) };
    let slope_se = (scale / sxx).sqrt();
    let t = StudentsT::new(0.0, 1.0, dof).map_err(|e| invalid(e.to_string()))?.inverse_cdf(0.975);
    Ok(OrderFit {
        slope,
        intercept,
        slope_se,
        ci_low: slope - t * slope_se,
        ci_high: slope + t * slope_se,
        points_used: n,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ou(s: f64) -> QuadraticGaussianObjective {
        QuadraticGaussianObjective::diagonal(&[1.0], vec![0.0], &[s]).unwrap()
    }

    fn synthetic(errors: Vec<f64>) -> WeakErrorCurve {
        let l_values: Vec<u32> = vec![1, 2, 4, 8, 16];
        WeakErrorCurve {
            stderr: vec![0.0; l_values.len()],
            estimates: errors.clone(),
            errors,
            l_values,
            n_replicas: 0,
            reference: 0.0,
            reference_se: 0.0,
            fit: None,
            inconclusive: None,
        }
    }

    #[test]
    fn synthetic_power_laws() {
        let c = synthetic([1.0, 2.0, 4.0, 8.0, 16.0].iter().map(|l| 0.3 / l).collect());
        let f = fit_order(&c).unwrap();
        assert!((f.slope + 1.0).abs() < 1e-12);
        assert!((f.intercept - 0.3f64.ln()).abs() < 1e-12);
        let c = synthetic([1.0, 2.0, 4.0, 8.0, 16.0].iter().map(|l: &f64| 0.3 / (l * l)).collect());
        assert!((fit_order(&c).unwrap().slope + 2.0).abs() < 1e-12);
    }

    #[test]
    fn noise_dominated_points_are_dropped() {
        let mut c = synthetic(vec![0.5, 0.25, 0.125, 0.01, 0.01]);
        c.stderr = vec![0.001, 0.001, 0.001, 0.01, 0.01];
        assert!(matches!(fit_order(&c), Ok(f) if f.points_used == 3));
        c.stderr = vec![1.0; 5];
        assert!(matches!(fit_order(&c), Err(Error::Insufficient(_))));
    }

    #[test]
    fn polynomial_validation_and_evaluation() {
        assert!(PolynomialTestFunction::coordinate_power(2, 0, 7).is_err());
        assert!(PolynomialTestFunction::coordinate_power(2, 2, 1).is_err());
        let g = PolynomialTestFunction::new(
            2,
            vec![
                Monomial { coef: 2.0, powers: vec![1, 2] },
                Monomial { coef: -1.0, powers: vec![0, 0] },
            ],
        )
        .unwrap();
        assert_eq!(g.degree(), 3);
        assert_eq!(g.evaluate(&[3.0, 2.0]), 23.0);
        let parsed: PolynomialTestFunction = serde_json::from_str(&serde_json::to_string(&g).unwrap()).unwrap();
        assert_eq!(parsed, g);
        assert!(serde_json::from_str::<PolynomialTestFunction>(r#"{"dim":1,"terms":[{"coef":1.0,"powers":[8]}]}"#).is_err());
    }

    #[test]
    fn isserlis_moments() {
        // 1-D N(μ, σ²): E X⁴ = μ⁴ + 6μ²σ² + 3σ⁴.
        let g = PolynomialTestFunction::coordinate_power(1, 0, 4).unwrap();
        let v = g.gaussian_expectation(&[1.5], &Matrix::from_diag(&[0.7])).unwrap();
        assert!((v - (1.5f64.powi(4) + 6.0 * 2.25 * 0.7 + 3.0 * 0.49)).abs() < 1e-12);
        // E X⁶ centered = 15σ⁶
        let g = PolynomialTestFunction::coordinate_power(1, 0, 6).unwrap();
        assert!((g.gaussian_expectation(&[0.0], &Matrix::from_diag(&[2.0])).unwrap() - 120.0).abs() < 1e-12);
        // E X₁²X₂² = C11 C22 + 2 C12² for centered.
        let c = Matrix::from_rows(&[vec![1.0, 0.5], vec![0.5, 2.0]]).unwrap();
        let g = PolynomialTestFunction::new(2, vec![Monomial { coef: 1.0, powers: vec![2, 2] }]).unwrap();
        assert!((g.gaussian_expectation(&[0.0, 0.0], &c).unwrap() - 2.5).abs() < 1e-12);
    }

    #[test]
    fn analytic_ou_examples() {
        let x = PolynomialTestFunction::coordinate_power(1, 0, 1).unwrap();
        let x2 = PolynomialTestFunction::coordinate_power(1, 0, 2).unwrap();
        let b = BatchSize::default();
        let v = analytic_ou_expectation(&ou(0.0), &x, &[1.0], 1.0, 1.0, b).unwrap();
        assert!((v - (-1f64).exp()).abs() < 1e-15);
        // ηS = 1 with η = 0.5
        let v = analytic_ou_expectation(&ou(2.0), &x2, &[0.0], 1.0, 0.5, b).unwrap();
        assert!((v - 0.432_332_358_381_693_6).abs() < 1e-12);
        let v = analytic_ou_expectation(&ou(2.0), &x2, &[0.0], 60.0, 0.5, b).unwrap();
        assert!((v - 0.5).abs() < 1e-12);
    }

    fn setup(replicas: usize) -> WeakOrderSetup {
        WeakOrderSetup {
            x0: vec![1.0],
            horizon: 1.0,
            eta: 0.5,
            lambda: 0.0,
            batch: BatchSize::default(),
            mode: SamplingMode::WithReplacement,
            l_values: vec![1, 2, 4, 8, 16],
            replicas,
        }
    }

    #[test]
    fn zero_noise_error_is_deterministic_euler_bias() {
        let q = ou(0.0);
        let g = PolynomialTestFunction::coordinate_power(1, 0, 1).unwrap();
        let st = setup(200);
        let exact = (-1f64).exp();
        let c = measure_weak_error(&q, &g, &st, &Reference::Exact { value: exact }, &StreamKey::new(0, "w")).unwrap();
        for (i, &l) in c.l_values.iter().enumerate() {
            let h = 0.5 / l as f64;
            assert!((c.errors[i] - ((1.0 - h).powi(2 * l as i32) - exact).abs()).abs() < 1e-14);
            assert!(c.stderr[i] < 1e-15);
        }
        let f = c.fit.unwrap();
        assert!((f.slope + 1.0).abs() < 0.2, "{f:?}");
    }

    #[test]
    fn constant_test_function_has_zero_error() {
        let g = PolynomialTestFunction::constant(1, 3.0).unwrap();
        let c = measure_weak_error(&ou(2.0), &g, &setup(200), &Reference::Exact { value: 3.0 }, &StreamKey::new(0, "w")).unwrap();
        assert!(c.errors.iter().all(|e| *e == 0.0));
        assert!(c.fit.is_none() && c.inconclusive.is_some());
    }

    #[test]
    fn fine_em_reference_matches_analytic() {
        let q = ou(2.0);
        let g = PolynomialTestFunction::coordinate_power(1, 0, 2).unwrap();
        let mut st = setup(20_000);
        st.l_values = vec![1, 2];
        let (m, se) = fine_em_reference(&q, &g, &st, 20_000, &StreamKey::new(1, "ref")).unwrap();
        let exact = analytic_ou_expectation(&q, &g, &[1.0], 1.0, 0.5, BatchSize::default()).unwrap();
        // EM bias at h = η/100 is O(h) ≈ 0.005·|derivative|; allow it on top of 4 SE.
        assert!((m - exact).abs() < 4.0 * se + 0.01, "{m} vs {exact} ± {se}");
    }

    #[test]
    fn setup_validation() {
        let mut st = setup(200);
        st.l_values = vec![0];
        assert!(st.validate().is_err());
        let mut st = setup(200);
        st.horizon = 0.1;
        st.l_values = vec![1];
        assert!(st.validate().is_err());
        assert!(setup(10).validate().is_err());
    }
}
