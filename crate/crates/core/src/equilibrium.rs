//! Equilibrium statistics of scale-invariant dynamics with weight decay, the
//! norm identities they satisfy, C-closeness, `(C, κ)`-LSI and the failure
//! certificates.

use std::fmt;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::integrators::{trajectory_key, DynamicsConfig, Integrator, IntegratorKind};
use crate::linalg::norm_sq;
use crate::objectives::StochasticObjective;

/// Default closeness threshold, `C² = 2`.
pub const DEFAULT_C: f64 = std::f64::consts::SQRT_2;

/// Number of standard errors a certificate must clear.
pub const CERTIFICATE_Z: f64 = 2.0;

/// Time-averaged `|x|²`, `|∇L(x)|²` and `Tr Σ^B(x)` of one replica.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ReplicaMeans {
    pub r: f64,
    pub g: f64,
    pub n: f64,
    /// Same averages over the first and second half of the window.
    pub first_half: [f64; 3],
    pub second_half: [f64; 3],
}

/// `R = E|x|²`, `G = E|∇L(x)|²`, `N = E Tr Σ^B(x)` at equilibrium.
///
/// `N` is always the raw trace at batch size `B`. For the SDE dynamics the
/// diffusion covariance is `ηΣ`, whose trace is `η N`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EquilibriumStats {
    pub kind: IntegratorKind,
    pub eta: f64,
    pub lambda: f64,
    pub batch: f64,
    pub r: f64,
    pub g: f64,
    pub n: f64,
    pub r_se: f64,
    pub g_se: f64,
    pub n_se: f64,
    pub burn_in_steps: u64,
    /// Recorded samples per replica times converged replicas.
    pub n_effective_samples: u64,
    pub replicas: usize,
    pub diverged_replicas: usize,
    /// False when the two halves of the window differ by more than 3 SE.
    pub stationary: bool,
    pub replica_means: Vec<ReplicaMeans>,
}

fn mean_se(v: &[f64]) -> (f64, f64) {
    let n = v.len() as f64;
    let m = v.iter().sum::<f64>() / n;
    if v.len() < 2 {
        return (m, f64::NAN);
    }
    let var = v.iter().map(|x| (x - m) * (x - m)).sum::<f64>() / (n - 1.0);
    (m, (var / n).sqrt())
}

/// Ratio of means with a delta-method SE from paired replica values.
fn ratio_se(a: &[f64], b: &[f64]) -> (f64, f64) {
    let (ma, _) = mean_se(a);
    let (mb, _) = mean_se(b);
    let q = ma / mb;
    let resid: Vec<f64> = a.iter().zip(b).map(|(x, y)| (x - q * y) / mb).collect();
    let (_, se) = mean_se(&resid);
    (q, se)
}

impl EquilibriumStats {
    /// Builds the summary from per-replica means.
    pub fn from_replicas(
        kind: IntegratorKind,
        cfg: &DynamicsConfig,
        burn_in_steps: u64,
        samples_per_replica: u64,
        replica_means: Vec<ReplicaMeans>,
        diverged_replicas: usize,
    ) -> Result<Self> {
        if replica_means.len() < 2 {
            return Err(Error::Insufficient(format!(
                "{} converged replicas, need at least 2 for standard errors",
                replica_means.len()
            )));
        }
        let col = |f: fn(&ReplicaMeans) -> f64| replica_means.iter().map(f).collect::<Vec<_>>();
        let (r, r_se) = mean_se(&col(|m| m.r));
        let (g, g_se) = mean_se(&col(|m| m.g));
        let (n, n_se) = mean_se(&col(|m| m.n));
        let mut stationary = true;
        for k in 0..3 {
            let diffs: Vec<f64> = replica_means.iter().map(|m| m.second_half[k] - m.first_half[k]).collect();
            let (d, se) = mean_se(&diffs);
            if d.abs() > 3.0 * se {
                stationary = false;
            }
        }
        Ok(Self {
            kind,
            eta: cfg.eta,
            lambda: cfg.lambda,
            batch: cfg.batch.value(),
            r,
            g,
            n,
            r_se,
            g_se,
            n_se,
            burn_in_steps,
            n_effective_samples: samples_per_replica * replica_means.len() as u64,
            replicas: replica_means.len() + diverged_replicas,
            diverged_replicas,
            stationary,
            replica_means,
        })
    }

    /// Synthetic stats without replica detail, for plugging in known values.
    pub fn from_values(kind: IntegratorKind, eta: f64, lambda: f64, batch: f64, r: f64, g: f64, n: f64) -> Self {
        Self {
            kind,
            eta,
            lambda,
            batch,
            r,
            g,
            n,
            r_se: 0.0,
            g_se: 0.0,
            n_se: 0.0,
            burn_in_steps: 0,
            n_effective_samples: 0,
            replicas: 0,
            diverged_replicas: 0,
            stationary: true,
            replica_means: Vec::new(),
        }
    }

    /// Noise-to-signal ratio `N/G` and its SE.
    pub fn nsr(&self) -> (f64, f64) {
        if self.replica_means.len() >= 2 {
            let n: Vec<f64> = self.replica_means.iter().map(|m| m.n).collect();
            let g: Vec<f64> = self.replica_means.iter().map(|m| m.g).collect();
            ratio_se(&n, &g)
        } else {
            let q = self.n / self.g;
            let rel = ((self.n_se / self.n).powi(2) + (self.g_se / self.g).powi(2)).sqrt();
            (q, (q * rel).abs())
        }
    }
}

/// How long to run and what to discard.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EquilibriumPlan {
    /// Steps discarded before averaging; defaults to half of `cfg.steps`.
    pub burn_in: Option<u64>,
    pub replicas: usize,
}

/// Runs `replicas` independent trajectories of `cfg.steps` steps from `x0`
/// and averages the test functions recorded every `cfg.record_every` steps
/// after burn-in. Replicas that diverge are excluded and counted.
pub fn estimate_equilibrium(
    obj: &dyn StochasticObjective,
    kind: IntegratorKind,
    cfg: &DynamicsConfig,
    x0: &[f64],
    plan: EquilibriumPlan,
) -> Result<EquilibriumStats> {
    if !obj.is_scale_invariant() {
        return Err(invalid("equilibrium statistics require a scale-invariant objective"));
    }
    if !(cfg.lambda > 0.0) {
        return Err(invalid("equilibrium statistics require weight decay λ > 0"));
    }
    cfg.validate()?;
    let burn_in = plan.burn_in.unwrap_or(cfg.steps / 2);
    if burn_in >= cfg.steps {
        return Err(invalid("burn-in must be shorter than the run"));
    }
    let recorded: Vec<u64> = ((burn_in + 1)..=cfg.steps).filter(|s| s % cfg.record_every == 0).collect();
    if recorded.len() < 2 {
        return Err(Error::Insufficient("fewer than 2 recorded samples after burn-in".into()));
    }
    let half = recorded.len() / 2;
    let key = trajectory_key(cfg.seed);
    let per_replica: Vec<Option<ReplicaMeans>> = (0..plan.replicas)
        .into_par_iter()
        .map(|rep| -> Result<Option<ReplicaMeans>> {
            let mut rng = key.stream(rep as u64);
            let mut integ = Integrator::new(obj, kind, cfg)?;
            let mut x = x0.to_vec();
            let mut sums = [[0.0f64; 3]; 2];
            let mut count = 0usize;
            for step in 1..=cfg.steps {
                if integ.advance(&mut x, &mut rng)?.is_none() {
                    return Ok(None);
                }
                if step > burn_in && step % cfg.record_every == 0 {
                    let vals = [
                        norm_sq(&x),
                        norm_sq(&obj.expected_gradient(&x)?),
                        obj.noise_trace(&x, cfg.batch)?,
                    ];
                    let part = usize::from(count >= half);
                    for k in 0..3 {
                        sums[part][k] += vals[k];
                    }
                    count += 1;
                }
            }
            let n1 = half as f64;
            let n2 = (count - half) as f64;
            let first_half = [sums[0][0] / n1, sums[0][1] / n1, sums[0][2] / n1];
            let second_half = [sums[1][0] / n2, sums[1][1] / n2, sums[1][2] / n2];
            let total = |k: usize| (sums[0][k] + sums[1][k]) / count as f64;
            Ok(Some(ReplicaMeans { r: total(0), g: total(1), n: total(2), first_half, second_half }))
        })
        .collect::<Result<Vec<_>>>()?;
    let diverged = per_replica.iter().filter(|m| m.is_none()).count();
    let means: Vec<ReplicaMeans> = per_replica.into_iter().flatten().collect();
    EquilibriumStats::from_replicas(kind, cfg, burn_in, recorded.len() as u64, means, diverged)
}

/// Which equilibrium relation a set of stats should satisfy.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum NormIdentity {
    /// `(2 − ηλ)λR = η(G + N)`.
    Sgd,
    /// `2λR̄ = N̄`, with `N̄ = η Tr Σ`.
    FirstOrderSde,
    /// `(2 + ηλ)λR′ = ηG′ + N′`, with `N′ = η Tr Σ`.
    SecondOrderSde,
}

impl NormIdentity {
    pub fn for_kind(kind: IntegratorKind) -> Self {
        match kind {
            IntegratorKind::Sgd | IntegratorKind::Svag => Self::Sgd,
            IntegratorKind::Ngd => Self::FirstOrderSde,
            IntegratorKind::Sde2 => Self::SecondOrderSde,
        }
    }

    /// `(lhs, rhs)` evaluated at the given `R, G, N`.
    pub fn sides(self, eta: f64, lambda: f64, r: f64, g: f64, n: f64) -> (f64, f64) {
        match self {
            Self::Sgd => ((2.0 - eta * lambda) * lambda * r, eta * (g + n)),
            Self::FirstOrderSde => (2.0 * lambda * r, eta * n),
            Self::SecondOrderSde => ((2.0 + eta * lambda) * lambda * r, eta * g + eta * n),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IdentityReport {
    pub identity: NormIdentity,
    pub lhs: f64,
    pub rhs: f64,
    /// `(lhs − rhs)/rhs`.
    pub relative_residual: f64,
    pub residual_se: f64,
    /// `(lhs − rhs)` in units of its standard error.
    pub z_score: f64,
}

pub fn check_norm_identity(stats: &EquilibriumStats, identity: NormIdentity) -> IdentityReport {
    let (lhs, rhs) = identity.sides(stats.eta, stats.lambda, stats.r, stats.g, stats.n);
    let relative_residual = (lhs - rhs) / rhs;
    let (residual_se, z_score) = if stats.replica_means.len() >= 2 {
        let diffs: Vec<f64> = stats
            .replica_means
            .iter()
            .map(|m| {
                let (l, r) = identity.sides(stats.eta, stats.lambda, m.r, m.g, m.n);
                l - r
            })
            .collect();
        let (d, se) = mean_se(&diffs);
        (se / rhs.abs(), if se > 0.0 { d / se } else { f64::NAN })
    } else {
        (0.0, f64::NAN)
    };
    IdentityReport { identity, lhs, rhs, relative_residual, residual_se, z_score }
}

/// One ratio test of a closeness check.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RatioTest {
    pub ratio: f64,
    /// `max(ratio, 1/ratio)`.
    pub two_sided: f64,
}

impl RatioTest {
    fn new(num: f64, den: f64, what: &str) -> Result<Self> {
        if !(num > 0.0 && den > 0.0) || !num.is_finite() || !den.is_finite() {
            return Err(Error::Undefined(format!("{what} ratio {num}/{den} is not a positive finite number")));
        }
        // max(num/den, den/num) rather than via 1/ratio, so that swapping the
        // arguments gives the identical value.
        Ok(Self { ratio: num / den, two_sided: (num / den).max(den / num) })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClosenessVerdict {
    pub c_achieved: f64,
    pub threshold: f64,
    pub pass: bool,
    pub r: RatioTest,
    pub g: RatioTest,
    pub n: RatioTest,
}

fn verdict(r: RatioTest, g: RatioTest, n: RatioTest, c: f64) -> ClosenessVerdict {
    let c_achieved = r.two_sided.max(g.two_sided).max(n.two_sided);
    ClosenessVerdict { c_achieved, threshold: c, pass: c_achieved <= c, r, g, n }
}

/// C-closeness of an SGD equilibrium and an SDE equilibrium: the ratios
/// `R/R̄`, `G/Ḡ` and `ηN/N̄`. Since `N̄ = η Tr Σ`, the last is the ratio
/// of raw traces.
pub fn c_closeness(sgd: &EquilibriumStats, sde: &EquilibriumStats, c: f64) -> Result<ClosenessVerdict> {
    Ok(verdict(
        RatioTest::new(sgd.r, sde.r, "R")?,
        RatioTest::new(sgd.g, sde.g, "G")?,
        RatioTest::new(sgd.n, sde.n, "N")?,
        c,
    ))
}

/// `(C, κ)`-LSI between the runs at `(B, η)` and `(κB, κη)`: ratios
/// `R^B/R^{κB}`, `G^B/G^{κB}` and `N^B/(κ N^{κB})`.
pub fn lsi_closeness(base: &EquilibriumStats, scaled: &EquilibriumStats, kappa: f64, c: f64) -> Result<ClosenessVerdict> {
    if !(kappa >= 1.0) {
        return Err(invalid(format!("κ must be ≥ 1, got {kappa}")));
    }
    Ok(verdict(
        RatioTest::new(base.r, scaled.r, "R")?,
        RatioTest::new(base.g, scaled.g, "G")?,
        RatioTest::new(base.n, kappa * scaled.n, "N")?,
        c,
    ))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING-KEBAB-CASE")]
pub enum CertificateStatus {
    FailCertified,
    Inconclusive,
}

impl fmt::Display for CertificateStatus {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Self::FailCertified => "FAIL-CERTIFIED",
            Self::Inconclusive => "INCONCLUSIVE",
        })
    }
}

/// Outcome of one sufficient condition.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Condition {
    pub holds: bool,
    /// Measured quantity, with `z·SE` added towards the safe side.
    pub measured: f64,
    pub threshold: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SdeCertificate {
    pub status: CertificateStatus,
    /// `η > (N̄/Ḡ)(C² − 1)`, from the SDE stats.
    pub condition_i: Option<Condition>,
    /// `N/G < 1/(C² − 1)`, from the SGD stats.
    pub condition_ii: Option<Condition>,
}

fn check_c(c: f64) -> Result<f64> {
    let c2m1 = c * c - 1.0;
    if !(c2m1 > 0.0) || !c.is_finite() {
        return Err(invalid(format!("threshold C must exceed 1, got {c}")));
    }
    Ok(c2m1)
}

/// Sufficient conditions for SGD at learning rate `eta` and the SDE not to be
/// C-close. Both conditions are checked with a margin of [`CERTIFICATE_Z`]
/// standard errors.
pub fn sde_failure_certificate(
    sde: Option<&EquilibriumStats>,
    sgd: Option<&EquilibriumStats>,
    eta: f64,
    c: f64,
) -> Result<SdeCertificate> {
    let c2m1 = check_c(c)?;
    if sde.is_none() && sgd.is_none() {
        return Err(invalid("certificate needs SDE or SGD statistics"));
    }
    let condition_i = sde.map(|s| {
        // N̄/Ḡ with N̄ = η_sde · Tr Σ
        let (nsr, se) = s.nsr();
        let bound = s.eta * (nsr + CERTIFICATE_Z * se) * c2m1;
        Condition { holds: eta > bound, measured: eta, threshold: bound }
    });
    let condition_ii = sgd.map(|s| {
        let (nsr, se) = s.nsr();
        let upper = nsr + CERTIFICATE_Z * se;
        let threshold = 1.0 / c2m1;
        Condition { holds: upper < threshold, measured: upper, threshold }
    });
    let fired = condition_i.is_some_and(|c| c.holds) || condition_ii.is_some_and(|c| c.holds);
    let status = if fired { CertificateStatus::FailCertified } else { CertificateStatus::Inconclusive };
    Ok(SdeCertificate { status, condition_i, condition_ii })
}

/// `(1 − 1/κ)/(C² − 1) − 1/κ`; requires `1 < C² < κ`.
pub fn lsi_threshold(c: f64, kappa: f64) -> Result<f64> {
    let c2m1 = check_c(c)?;
    if !(c * c < kappa) {
        return Err(invalid(format!("C must satisfy C < √κ, got C² = {} and κ = {kappa}", c * c)));
    }
    Ok((1.0 - 1.0 / kappa) / c2m1 - 1.0 / kappa)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LsiCertificate {
    pub status: CertificateStatus,
    pub kappa: f64,
    pub condition: Condition,
}

/// Sufficient condition, checked on the `(κB, κη)` run, for the absence of
/// `(C, κ)`-LSI: its `N/G` lies below [`lsi_threshold`].
pub fn lsi_failure_certificate(scaled: &EquilibriumStats, c: f64, kappa: f64) -> Result<LsiCertificate> {
    let threshold = lsi_threshold(c, kappa)?;
    let (nsr, se) = scaled.nsr();
    let upper = nsr + CERTIFICATE_Z * se;
    let holds = upper < threshold;
    Ok(LsiCertificate {
        status: if holds { CertificateStatus::FailCertified } else { CertificateStatus::Inconclusive },
        kappa,
        condition: Condition { holds, measured: upper, threshold },
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KappaPrediction {
    /// `C²(1 + N/G)`.
    pub kappa_star: f64,
    pub kappa_star_se: f64,
    /// `C² N/G`.
    pub approximate: f64,
    pub nsr: f64,
    pub c: f64,
}

/// Scaling factor beyond which `(C, κ)`-LSI must fail, from one baseline run.
pub fn predict_critical_kappa(baseline: &EquilibriumStats, c: f64) -> Result<KappaPrediction> {
    check_c(c)?;
    if !(baseline.g > baseline.g_se) {
        return Err(Error::Undefined("G is within one standard error of zero".into()));
    }
    let (nsr, se) = baseline.nsr();
    let c2 = c * c;
    Ok(KappaPrediction { kappa_star: c2 * (1.0 + nsr), kappa_star_se: c2 * se, approximate: c2 * nsr, nsr, c })
}

/// One row of a κ sweep.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KappaSweepRow {
    pub kappa: f64,
    pub stats: EquilibriumStats,
    pub closeness: ClosenessVerdict,
    /// `None` where the certificate is undefined (`κ ≤ C²`).
    pub certificate: Option<CertificateStatus>,
}

pub const KAPPA_SWEEP_HEADER: &str = "kappa,R,G,N,NSR,C_achieved,certificate";

pub fn kappa_sweep_csv(rows: &[KappaSweepRow]) -> String {
    let mut s = format!("{KAPPA_SWEEP_HEADER}\n");
    for row in rows {
        let cert = row.certificate.map(|c| c.to_string()).unwrap_or_else(|| "UNDEFINED".into());
        s.push_str(&format!(
            "{},{},{},{},{},{},{}\n",
            row.kappa,
            row.stats.r,
            row.stats.g,
            row.stats.n,
            row.stats.nsr().0,
            row.closeness.c_achieved,
            cert
        ));
    }
    s
}

#[cfg(test)]
mod tests {
    use super::*;

    fn stats(kind: IntegratorKind, eta: f64, r: f64, g: f64, n: f64) -> EquilibriumStats {
        EquilibriumStats::from_values(kind, eta, 0.01, 1.0, r, g, n)
    }

    #[test]
    fn exact_identity_has_zero_residual() {
        let (eta, lambda) = (0.1, 0.01);
        let (g, n) = (0.2, 0.8);
        let r = eta * (g + n) / ((2.0 - eta * lambda) * lambda);
        let s = stats(IntegratorKind::Sgd, eta, r, g, n);
        let rep = check_norm_identity(&s, NormIdentity::Sgd);
        assert!(rep.relative_residual.abs() < 1e-15);
    }

    #[test]
    fn sde_stats_in_sgd_identity_miss_the_gradient_term() {
        let (eta, lambda) = (0.1, 0.01);
        let (g, n) = (0.3, 0.7);
        let r = eta * n / (2.0 * lambda);
        let s = stats(IntegratorKind::Ngd, eta, r, g, n);
        assert!(check_norm_identity(&s, NormIdentity::FirstOrderSde).relative_residual.abs() < 1e-15);
        let wrong = check_norm_identity(&s, NormIdentity::Sgd);
        // lhs/rhs − 1 = (2 − ηλ)N / (2(G + N)) − 1
        let expect = (2.0 - eta * lambda) * n / (2.0 * (g + n)) - 1.0;
        assert!((wrong.relative_residual - expect).abs() < 1e-14);
    }

    #[test]
    fn closeness_examples() {
        let a = stats(IntegratorKind::Sgd, 0.1, 1.0, 2.0, 3.0);
        assert_eq!(c_closeness(&a, &a, DEFAULT_C).unwrap().c_achieved, 1.0);
        let b = stats(IntegratorKind::Ngd, 0.1, 1.5, 2.0, 3.0);
        let v = c_closeness(&b, &a, DEFAULT_C).unwrap();
        assert_eq!(v.c_achieved, 1.5);
        assert!(!v.pass);
        assert_eq!(c_closeness(&a, &b, DEFAULT_C).unwrap().c_achieved, 1.5);
        let z = stats(IntegratorKind::Ngd, 0.1, 1.0, 0.0, 3.0);
        assert!(matches!(c_closeness(&a, &z, DEFAULT_C), Err(Error::Undefined(_))));
    }

    #[test]
    fn sde_certificate_examples() {
        let sde = stats(IntegratorKind::Ngd, 1.0, 1.0, 2.0, 1.0);
        let cert = sde_failure_certificate(Some(&sde), None, 1.0, DEFAULT_C).unwrap();
        assert_eq!(cert.status, CertificateStatus::FailCertified);
        let sgd = stats(IntegratorKind::Sgd, 1.0, 1.0, 1.0, 10.0);
        let cert = sde_failure_certificate(None, Some(&sgd), 1.0, DEFAULT_C).unwrap();
        assert_eq!(cert.status, CertificateStatus::Inconclusive);
        assert!(!cert.condition_ii.unwrap().holds);
    }

    #[test]
    fn lsi_threshold_examples() {
        assert!((lsi_threshold(DEFAULT_C, 4.0).unwrap() - 0.5).abs() < 1e-12);
        assert!((lsi_threshold(DEFAULT_C, 1e12).unwrap() - 1.0).abs() < 1e-9);
        assert!(lsi_threshold(DEFAULT_C, 2.0).is_err());
        let scaled = stats(IntegratorKind::Sgd, 0.4, 1.0, 1.0, 0.3);
        let cert = lsi_failure_certificate(&scaled, DEFAULT_C, 4.0).unwrap();
        assert_eq!(cert.status, CertificateStatus::FailCertified);
    }

    #[test]
    fn critical_kappa_examples() {
        let s = stats(IntegratorKind::Sgd, 0.1, 1.0, 1.0, 9.0);
        let k = predict_critical_kappa(&s, DEFAULT_C).unwrap();
        assert!((k.kappa_star - 20.0).abs() < 1e-12);
        let s = stats(IntegratorKind::Sgd, 0.1, 1.0, 1.0, 100.0);
        let k = predict_critical_kappa(&s, DEFAULT_C).unwrap();
        assert!((k.approximate - 200.0).abs() < 1e-9 && (k.kappa_star - 202.0).abs() < 1e-9);
        let s = stats(IntegratorKind::Sgd, 0.1, 1.0, 0.0, 1.0);
        assert!(predict_critical_kappa(&s, DEFAULT_C).is_err());
    }
}
