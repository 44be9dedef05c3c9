use std::fmt::Write as _;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{Artifacts, BuiltObjective, Diagnostic, ObjectiveSpec, Verdict};
use crate::equilibrium::{
    c_closeness, check_norm_identity, estimate_equilibrium, kappa_sweep_csv, lsi_closeness, lsi_failure_certificate,
    predict_critical_kappa, sde_failure_certificate, CertificateStatus, ClosenessVerdict, EquilibriumPlan,
    EquilibriumStats, IdentityReport, KappaPrediction, KappaSweepRow, NormIdentity, SdeCertificate, DEFAULT_C,
};
use crate::error::Result;
use crate::integrators::{run_poisson_lsr, DynamicsConfig, IntegratorKind};
use crate::moments::{
    compare_moments, estimate_one_step_moments, scalar_moments, theoretical_svag_moments, MomentReport, ScalarMoments,
    DEFAULT_Z_MAX, MIN_SAMPLES,
};
use crate::objectives::{BatchSize, QuadraticGaussianObjective, SamplingMode, StochasticObjective};
use crate::rng::StreamKey;
use crate::tailindex::{bias_csv, cauchy_experiment, gaussian_bias_experiment, BiasPoint};
use crate::weakorder::{analytic_ou_expectation, measure_weak_error, PolynomialTestFunction, Reference, WeakOrderSetup};

fn default_c() -> f64 {
    DEFAULT_C
}
fn default_z() -> f64 {
    DEFAULT_Z_MAX
}
fn default_samples() -> usize {
    1_000_000
}
fn default_svag() -> IntegratorKind {
    IntegratorKind::Svag
}
fn default_record() -> u64 {
    10
}
fn default_true() -> bool {
    true
}
fn default_tolerance() -> f64 {
    0.05
}
fn default_factor() -> usize {
    4
}
fn default_slope_range() -> [f64; 2] {
    [-1.35, -0.65]
}
fn default_rate() -> f64 {
    1.0
}
fn default_tail_z() -> f64 {
    3.0
}
fn all_dynamics() -> Vec<IntegratorKind> {
    vec![IntegratorKind::Sgd, IntegratorKind::Ngd, IntegratorKind::Sde2]
}

fn check_positive(v: f64, path: &str, what: &str, out: &mut Vec<Diagnostic>) {
    if !(v.is_finite() && v > 0.0) {
        out.push(Diagnostic::error(path, format!("{what} must be positive, got {v}")));
    }
}

fn check_l_values(ls: &[u32], path: &str, out: &mut Vec<Diagnostic>) {
    if ls.is_empty() {
        out.push(Diagnostic::error(path, "at least one l value is required"));
    }
    for (i, &l) in ls.iter().enumerate() {
        if l < 1 {
            out.push(Diagnostic::error(format!("{path}[{i}]"), "SVAG parameter l ≥ 1 required"));
        }
    }
}

fn check_point(obj: &dyn StochasticObjective, x: &[f64], path: &str, out: &mut Vec<Diagnostic>) {
    if x.len() != obj.dim() {
        out.push(Diagnostic::error(path, format!("expected {} coordinates, got {}", obj.dim(), x.len())));
    } else if x.iter().any(|v| !v.is_finite()) {
        out.push(Diagnostic::error(path, "coordinates must be finite"));
    } else if obj.is_scale_invariant() && x.iter().all(|v| *v == 0.0) {
        out.push(Diagnostic::error(path, "scale-invariant objectives are undefined at the origin"));
    }
}

fn check_batch(obj: &BuiltObjective, batch: BatchSize, mode: SamplingMode, path: &str, out: &mut Vec<Diagnostic>) {
    if let BuiltObjective::Rayleigh(r) = obj {
        match batch.count() {
            Ok(b) if b > r.samples() && mode != SamplingMode::WithReplacement => {
                out.push(Diagnostic::error(path, format!("batch {b} exceeds the {} dataset samples", r.samples())))
            }
            Ok(_) => {}
            Err(_) => out.push(Diagnostic::error(path, "dataset objectives need an integer batch size")),
        }
    }
}

/// Independent per-run seed derived from the master seed and a label.
fn sub_seed(seed: u64, label: &str) -> u64 {
    let digest = super::sha256_hex(format!("{seed}/{label}").as_bytes());
    u64::from_str_radix(&digest[..16], 16).expect("hex digest")
}

fn ones(obj: &dyn StochasticObjective) -> Vec<f64> {
    vec![1.0; obj.dim()]
}

// ---------------------------------------------------------------- moments

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MomentsParams {
    pub objective: ObjectiveSpec,
    /// Point at which the increment is sampled.
    pub x: Vec<f64>,
    pub eta: f64,
    #[serde(default)]
    pub lambda: f64,
    #[serde(default)]
    pub batch: BatchSize,
    #[serde(default)]
    pub mode: SamplingMode,
    /// `sgd` or `svag`.
    #[serde(default = "default_svag")]
    pub dynamics: IntegratorKind,
    pub l_values: Vec<u32>,
    #[serde(default = "default_samples")]
    pub n_samples: usize,
    #[serde(default = "default_z")]
    pub z_max: f64,
}

#[derive(Serialize)]
struct MomentsEntry<'a> {
    l: u32,
    report: &'a MomentReport,
}

impl MomentsParams {
    pub(crate) fn check(&self, base: &Path) -> Vec<Diagnostic> {
        let mut d = Vec::new();
        check_positive(self.eta, "params.eta", "learning rate", &mut d);
        if !(self.lambda >= 0.0) {
            d.push(Diagnostic::error("params.lambda", "weight decay must be ≥ 0"));
        }
        check_l_values(&self.l_values, "params.l_values", &mut d);
        match self.dynamics {
            IntegratorKind::Svag => {}
            IntegratorKind::Sgd => {
                if self.l_values.iter().any(|&l| l != 1) {
                    d.push(Diagnostic::error("params.l_values", "SGD moments require l = 1"));
                }
            }
            k => d.push(Diagnostic::error("params.dynamics", format!("moment formulas cover sgd and svag, not {k}"))),
        }
        if self.n_samples < MIN_SAMPLES {
            d.push(Diagnostic::error("params.n_samples", format!("need at least {MIN_SAMPLES} samples")));
        }
        check_positive(self.z_max, "params.z_max", "z_max", &mut d);
        if let Some(obj) = self.objective.checked(base, "params.objective", &mut d) {
            check_point(obj.as_dyn(), &self.x, "params.x", &mut d);
            check_batch(&obj, self.batch, self.mode, "params.batch", &mut d);
        }
        d
    }

    pub(crate) fn run(&self, seed: u64, base: &Path, art: &mut Artifacts) -> Result<Verdict> {
        let built = self.objective.build(base)?;
        let obj = built.as_dyn();
        let key = StreamKey::new(seed, "moments");
        let mut reports = Vec::new();
        for &l in &self.l_values {
            let mut cfg = DynamicsConfig::new(self.eta, 1);
            cfg.lambda = self.lambda;
            cfg.batch = self.batch;
            cfg.mode = self.mode;
            cfg.svag_l = l;
            let est = estimate_one_step_moments(self.dynamics, obj, &self.x, &cfg, self.n_samples, &key.child(format!("l{l}")))?;
            let theory = theoretical_svag_moments(obj, &self.x, &cfg)?;
            reports.push((l, compare_moments(&est, &theory, self.z_max)?));
        }
        let mut csv = String::from("l,order,entries,max_abs_z,pass\n");
        let mut fourth = String::from("l,fourth_norm,stderr\n");
        let mut checks = Vec::new();
        for (l, r) in &reports {
            for o in &r.orders {
                let _ = writeln!(csv, "{l},{},{},{},{}", o.order, o.entries, o.max_abs_z, o.pass);
            }
            let _ = writeln!(
                fourth,
                "{l},{},{}",
                r.estimated.fourth_norm.unwrap_or(f64::NAN),
                r.estimated.fourth_norm_se.unwrap_or(f64::NAN)
            );
            let worst = r.orders.iter().map(|o| o.max_abs_z).fold(0.0, f64::max);
            checks.push((Some(r.pass), format!("l = {l}: orders 1–3 max |z| = {worst:.2} (bound {})", self.z_max)));
        }
        art.add("moments.csv", csv);
        art.add("fourth_norm.csv", fourth);
        let entries: Vec<MomentsEntry> = reports.iter().map(|(l, r)| MomentsEntry { l: *l, report: r }).collect();
        art.add_json("moments.json", &entries)?;
        Ok(Verdict::from_checks(checks))
    }
}

// ------------------------------------------------------------- weak order

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct WeakOrderParams {
    pub objective: ObjectiveSpec,
    pub test_function: PolynomialTestFunction,
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
    /// Reference replicas per SVAG replica when no analytic value exists.
    #[serde(default = "default_factor")]
    pub reference_replica_factor: usize,
    #[serde(default = "default_slope_range")]
    pub slope_range: [f64; 2],
}

impl WeakOrderParams {
    fn setup(&self) -> WeakOrderSetup {
        WeakOrderSetup {
            x0: self.x0.clone(),
            horizon: self.horizon,
            eta: self.eta,
            lambda: self.lambda,
            batch: self.batch,
            mode: self.mode,
            l_values: self.l_values.clone(),
            replicas: self.replicas,
        }
    }

    pub(crate) fn check(&self, base: &Path) -> Vec<Diagnostic> {
        let mut d = Vec::new();
        check_l_values(&self.l_values, "params.l_values", &mut d);
        if !self.l_values.iter().any(|&l| l < 1) {
            if let Err(e) = self.setup().validate() {
                d.push(Diagnostic::error("params", e.to_string()));
            }
        }
        if self.reference_replica_factor < 1 {
            d.push(Diagnostic::error("params.reference_replica_factor", "must be ≥ 1"));
        }
        if !(self.slope_range[0] < self.slope_range[1]) {
            d.push(Diagnostic::error("params.slope_range", "expected [low, high] with low < high"));
        }
        if let Some(obj) = self.objective.checked(base, "params.objective", &mut d) {
            check_point(obj.as_dyn(), &self.x0, "params.x0", &mut d);
            check_batch(&obj, self.batch, self.mode, "params.batch", &mut d);
            if self.test_function.dim() != obj.as_dyn().dim() {
                d.push(Diagnostic::error("params.test_function.dim", "does not match the objective dimension"));
            }
        }
        d
    }

    pub(crate) fn run(&self, seed: u64, base: &Path, art: &mut Artifacts) -> Result<Verdict> {
        let built = self.objective.build(base)?;
        let reference = match &built {
            BuiltObjective::Quadratic(q) => {
                let mut a = q.a().clone();
                for i in 0..a.rows() {
                    a[(i, i)] += self.lambda;
                }
                let shifted = QuadraticGaussianObjective::new(a, q.b_mean().to_vec(), q.s().clone())?;
                Reference::Exact {
                    value: analytic_ou_expectation(&shifted, &self.test_function, &self.x0, self.horizon, self.eta, self.batch)?,
                }
            }
            _ => Reference::FineEm { replica_factor: self.reference_replica_factor },
        };
        let curve =
            measure_weak_error(built.as_dyn(), &self.test_function, &self.setup(), &reference, &StreamKey::new(seed, "weak-order"))?;
        art.add("weak_error.csv", curve.to_csv());
        art.add("weak_error.json", curve.summary_json()? + "\n");
        let [lo, hi] = self.slope_range;
        let check = match (&curve.fit, &curve.inconclusive) {
            (Some(f), _) => (
                Some(f.slope >= lo && f.slope <= hi && !f.ci_contains(0.0)),
                format!(
                    "slope {:.3} (95% CI [{:.3}, {:.3}]) in [{lo}, {hi}] with CI excluding 0",
                    f.slope, f.ci_low, f.ci_high
                ),
            ),
            (None, msg) => (None, msg.clone().unwrap_or_default()),
        };
        Ok(Verdict::from_checks(vec![check]))
    }
}

// ------------------------------------------------------------ equilibrium

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EquilibriumParams {
    pub objective: ObjectiveSpec,
    /// Starting point; all ones by default.
    #[serde(default)]
    pub x0: Option<Vec<f64>>,
    #[serde(default = "all_dynamics")]
    pub dynamics: Vec<IntegratorKind>,
    pub etas: Vec<f64>,
    pub lambda: f64,
    #[serde(default)]
    pub batch: BatchSize,
    #[serde(default)]
    pub mode: SamplingMode,
    /// Minimum number of steps per run.
    pub steps: u64,
    /// Runs last at least this many multiples of `1/(ηλ)` steps.
    #[serde(default)]
    pub relaxation_times: f64,
    #[serde(default = "default_record")]
    pub record_every: u64,
    /// Euler–Maruyama substep `η/ratio` for the SDE dynamics.
    #[serde(default)]
    pub substep_ratio: Option<f64>,
    pub replicas: usize,
    #[serde(default)]
    pub burn_in_fraction: Option<f64>,
    #[serde(default = "default_c")]
    pub c: f64,
    #[serde(default = "default_tolerance")]
    pub identity_tolerance: f64,
    #[serde(default = "default_true")]
    pub check_identities: bool,
}

fn run_steps(steps: u64, relaxation_times: f64, eta: f64, lambda: f64) -> u64 {
    steps.max((relaxation_times / (eta * lambda)).ceil() as u64)
}

fn check_burn_in(f: Option<f64>, out: &mut Vec<Diagnostic>) {
    if let Some(f) = f {
        if !(0.0..1.0).contains(&f) {
            out.push(Diagnostic::error("params.burn_in_fraction", "must lie in [0, 1)"));
        }
    }
}

fn plan(steps: u64, fraction: Option<f64>, replicas: usize) -> EquilibriumPlan {
    EquilibriumPlan { burn_in: Some((steps as f64 * fraction.unwrap_or(0.5)).floor() as u64), replicas }
}

#[derive(Serialize)]
struct EquilibriumRow {
    stats: EquilibriumStats,
    identity: IdentityReport,
}

#[derive(Serialize)]
struct ClosenessRow {
    eta: f64,
    closeness: ClosenessVerdict,
    certificate: SdeCertificate,
}

#[derive(Serialize)]
struct EquilibriumSummary {
    rows: Vec<EquilibriumRow>,
    closeness: Vec<ClosenessRow>,
    first_certified_eta: Option<f64>,
    first_broken_eta: Option<f64>,
}

/// Factor-two agreement between the first grid value where a certificate
/// fires and the first where closeness is measured to fail.
fn factor_two(first_cert: Option<f64>, first_break: Option<f64>, grid_max: f64, what: &str) -> (Option<bool>, String) {
    match (first_cert, first_break) {
        (Some(a), Some(b)) => {
            let ratio = a.max(b) / a.min(b);
            (Some(ratio <= 2.0), format!("first certified {what} = {a}, first broken {what} = {b} (ratio {ratio:.2} ≤ 2)"))
        }
        (Some(a), None) if grid_max >= 2.0 * a => {
            (Some(false), format!("certificate fires at {what} = {a} but no break up to {grid_max}"))
        }
        (None, Some(b)) if grid_max >= 2.0 * b => {
            (Some(false), format!("break at {what} = {b} but no certificate up to {grid_max}"))
        }
        _ => (None, format!("grid too short to compare certificate and break in {what}")),
    }
}

impl EquilibriumParams {
    pub(crate) fn check(&self, base: &Path) -> Vec<Diagnostic> {
        let mut d = Vec::new();
        if self.etas.is_empty() {
            d.push(Diagnostic::error("params.etas", "at least one learning rate is required"));
        }
        for (i, &e) in self.etas.iter().enumerate() {
            check_positive(e, &format!("params.etas[{i}]"), "learning rate", &mut d);
        }
        check_positive(self.lambda, "params.lambda", "weight decay λ", &mut d);
        if self.dynamics.is_empty() {
            d.push(Diagnostic::error("params.dynamics", "at least one dynamics kind is required"));
        }
        if self.dynamics.contains(&IntegratorKind::Svag) {
            d.push(Diagnostic::error("params.dynamics", "svag is not supported for equilibrium runs"));
        }
        if self.replicas < 2 {
            d.push(Diagnostic::error("params.replicas", "need at least 2 replicas"));
        }
        if self.record_every < 1 {
            d.push(Diagnostic::error("params.record_every", "must be ≥ 1"));
        }
        if let Some(r) = self.substep_ratio {
            if !(r >= 1.0) {
                d.push(Diagnostic::error("params.substep_ratio", "must be ≥ 1"));
            }
        }
        if !(self.relaxation_times >= 0.0) {
            d.push(Diagnostic::error("params.relaxation_times", "must be ≥ 0"));
        }
        check_burn_in(self.burn_in_fraction, &mut d);
        if !(self.c > 1.0) {
            d.push(Diagnostic::error("params.c", "threshold C must exceed 1"));
        }
        check_positive(self.identity_tolerance, "params.identity_tolerance", "tolerance", &mut d);
        if let Some(obj) = self.objective.checked(base, "params.objective", &mut d) {
            if !obj.as_dyn().is_scale_invariant() {
                d.push(Diagnostic::error("params.objective", "equilibrium runs need a scale-invariant objective"));
            }
            if let Some(x0) = &self.x0 {
                check_point(obj.as_dyn(), x0, "params.x0", &mut d);
            }
            check_batch(&obj, self.batch, self.mode, "params.batch", &mut d);
        }
        d
    }

    pub(crate) fn run(&self, seed: u64, base: &Path, art: &mut Artifacts) -> Result<Verdict> {
        let built = self.objective.build(base)?;
        let obj = built.as_dyn();
        let x0 = self.x0.clone().unwrap_or_else(|| ones(obj));
        let mut rows = Vec::new();
        let mut closeness = Vec::new();
        let mut checks = Vec::new();
        for &eta in &self.etas {
            let steps = run_steps(self.steps, self.relaxation_times, eta, self.lambda);
            let mut per_kind = Vec::new();
            for &kind in &self.dynamics {
                let mut cfg = DynamicsConfig::new(eta, steps);
                cfg.lambda = self.lambda;
                cfg.batch = self.batch;
                cfg.mode = self.mode;
                cfg.record_every = self.record_every;
                cfg.substep = self.substep_ratio.map(|r| eta / r);
                cfg.seed = sub_seed(seed, &format!("equilibrium/{kind}/{eta}"));
                let stats = estimate_equilibrium(obj, kind, &cfg, &x0, plan(steps, self.burn_in_fraction, self.replicas))?;
                let identity = check_norm_identity(&stats, NormIdentity::for_kind(kind));
                if self.check_identities {
                    checks.push((
                        Some(identity.relative_residual.abs() < self.identity_tolerance),
                        format!(
                            "{kind} at η = {eta}: identity residual {:+.4} ± {:.4} (tolerance {})",
                            identity.relative_residual, identity.residual_se, self.identity_tolerance
                        ),
                    ));
                }
                per_kind.push(stats.clone());
                rows.push(EquilibriumRow { stats, identity });
            }
            let sgd = per_kind.iter().find(|s| s.kind == IntegratorKind::Sgd);
            let ngd = per_kind.iter().find(|s| s.kind == IntegratorKind::Ngd);
            if let (Some(sgd), Some(ngd)) = (sgd, ngd) {
                closeness.push(ClosenessRow {
                    eta,
                    closeness: c_closeness(sgd, ngd, self.c)?,
                    certificate: sde_failure_certificate(Some(ngd), Some(sgd), eta, self.c)?,
                });
            }
        }

        let mut csv = String::from(
            "kind,eta,lambda,batch,R,R_se,G,G_se,N,N_se,NSR,identity_residual,identity_residual_se,stationary,diverged_replicas\n",
        );
        for r in &rows {
            let s = &r.stats;
            let _ = writeln!(
                csv,
                "{},{},{},{},{},{},{},{},{},{},{},{},{},{},{}",
                s.kind,
                s.eta,
                s.lambda,
                s.batch,
                s.r,
                s.r_se,
                s.g,
                s.g_se,
                s.n,
                s.n_se,
                s.nsr().0,
                r.identity.relative_residual,
                r.identity.residual_se,
                s.stationary,
                s.diverged_replicas
            );
        }
        art.add("equilibrium.csv", csv);

        let first_cert = closeness.iter().find(|c| c.certificate.status == CertificateStatus::FailCertified).map(|c| c.eta);
        let first_break = closeness.iter().find(|c| c.closeness.c_achieved > self.c).map(|c| c.eta);
        if !closeness.is_empty() {
            let mut csv = String::from("eta,C_achieved,R_ratio,G_ratio,N_ratio,certificate\n");
            for c in &closeness {
                let _ = writeln!(
                    csv,
                    "{},{},{},{},{},{}",
                    c.eta, c.closeness.c_achieved, c.closeness.r.ratio, c.closeness.g.ratio, c.closeness.n.ratio, c.certificate.status
                );
            }
            art.add("closeness.csv", csv);
            if closeness.len() >= 2 {
                let max = self.etas.iter().cloned().fold(0.0, f64::max);
                checks.push(factor_two(first_cert, first_break, max, "η"));
            }
        }
        art.add_json("equilibrium.json", &EquilibriumSummary { rows, closeness, first_certified_eta: first_cert, first_broken_eta: first_break })?;
        Ok(Verdict::from_checks(checks))
    }
}

// -------------------------------------------------------------- lsr sweep

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LsrSweepParams {
    pub objective: ObjectiveSpec,
    #[serde(default)]
    pub x0: Option<Vec<f64>>,
    /// Baseline learning rate.
    pub eta: f64,
    /// Baseline batch size.
    pub batch: BatchSize,
    pub lambda: f64,
    #[serde(default)]
    pub mode: SamplingMode,
    pub kappas: Vec<f64>,
    /// Baseline steps; the run at `κ` takes `⌈steps/κ⌉` (same `B·steps`).
    pub steps: u64,
    #[serde(default)]
    pub relaxation_times: f64,
    #[serde(default = "default_record")]
    pub record_every: u64,
    pub replicas: usize,
    #[serde(default)]
    pub burn_in_fraction: Option<f64>,
    #[serde(default = "default_c")]
    pub c: f64,
}

#[derive(Serialize)]
struct KappaSummary<'a> {
    prediction: &'a KappaPrediction,
    first_breaking_kappa: Option<f64>,
    first_certified_kappa: Option<f64>,
    rows: &'a [KappaSweepRow],
}

impl LsrSweepParams {
    pub(crate) fn check(&self, base: &Path) -> Vec<Diagnostic> {
        let mut d = Vec::new();
        check_positive(self.eta, "params.eta", "learning rate", &mut d);
        check_positive(self.lambda, "params.lambda", "weight decay λ", &mut d);
        if self.replicas < 2 {
            d.push(Diagnostic::error("params.replicas", "need at least 2 replicas"));
        }
        if self.record_every < 1 {
            d.push(Diagnostic::error("params.record_every", "must be ≥ 1"));
        }
        check_burn_in(self.burn_in_fraction, &mut d);
        if self.kappas.is_empty() {
            d.push(Diagnostic::error("params.kappas", "at least one κ is required"));
        }
        for (i, &k) in self.kappas.iter().enumerate() {
            if !(k >= 1.0 && k.is_finite()) {
                d.push(Diagnostic::error(format!("params.kappas[{i}]"), format!("κ must be ≥ 1, got {k}")));
            }
        }
        if !(self.c > 1.0) {
            d.push(Diagnostic::error("params.c", "threshold C must exceed 1"));
        } else {
            let c2 = self.c * self.c;
            let above: Vec<f64> = self.kappas.iter().cloned().filter(|&k| k > 1.0).collect();
            if !above.is_empty() && above.iter().all(|&k| c2 >= k) {
                d.push(Diagnostic::error(
                    "params.c",
                    format!("C must satisfy C < √κ (C² = {c2}, largest κ = {})", above.iter().cloned().fold(0.0, f64::max)),
                ));
            } else {
                for (i, &k) in self.kappas.iter().enumerate() {
                    if k > 1.0 && c2 >= k {
                        d.push(Diagnostic::warning(
                            format!("params.kappas[{i}]"),
                            format!("no LSI certificate at κ = {k}: C must satisfy C < √κ"),
                        ));
                    }
                }
            }
        }
        if let Some(obj) = self.objective.checked(base, "params.objective", &mut d) {
            if !obj.as_dyn().is_scale_invariant() {
                d.push(Diagnostic::error("params.objective", "LSI sweeps need a scale-invariant objective"));
            }
            if let Some(x0) = &self.x0 {
                check_point(obj.as_dyn(), x0, "params.x0", &mut d);
            }
            for (i, &k) in self.kappas.iter().enumerate() {
                if let Ok(b) = BatchSize::new(self.batch.value() * k) {
                    check_batch(&obj, b, self.mode, &format!("params.kappas[{i}]"), &mut d);
                }
            }
        }
        d
    }

    fn stats_at(&self, obj: &dyn StochasticObjective, x0: &[f64], kappa: f64, seed: u64) -> Result<EquilibriumStats> {
        let base_steps = run_steps(self.steps, self.relaxation_times, self.eta, self.lambda);
        let steps = (base_steps as f64 / kappa).ceil() as u64;
        let mut cfg = DynamicsConfig::new(self.eta * kappa, steps);
        cfg.lambda = self.lambda;
        cfg.batch = BatchSize::new(self.batch.value() * kappa)?;
        cfg.mode = self.mode;
        cfg.record_every = self.record_every;
        cfg.seed = sub_seed(seed, &format!("lsr-sweep/{kappa}"));
        estimate_equilibrium(obj, IntegratorKind::Sgd, &cfg, x0, plan(steps, self.burn_in_fraction, self.replicas))
    }

    pub(crate) fn run(&self, seed: u64, base: &Path, art: &mut Artifacts) -> Result<Verdict> {
        let built = self.objective.build(base)?;
        let obj = built.as_dyn();
        let x0 = self.x0.clone().unwrap_or_else(|| ones(obj));
        let baseline = self.stats_at(obj, &x0, 1.0, seed)?;
        let prediction = predict_critical_kappa(&baseline, self.c)?;
        let mut rows = Vec::new();
        for &kappa in &self.kappas {
            let stats = if kappa == 1.0 { baseline.clone() } else { self.stats_at(obj, &x0, kappa, seed)? };
            let closeness = lsi_closeness(&baseline, &stats, kappa, self.c)?;
            let certificate =
                if self.c * self.c < kappa { Some(lsi_failure_certificate(&stats, self.c, kappa)?.status) } else { None };
            rows.push(KappaSweepRow { kappa, stats, closeness, certificate });
        }
        art.add("kappa_sweep.csv", kappa_sweep_csv(&rows));
        let first_break = rows.iter().find(|r| r.closeness.c_achieved > self.c).map(|r| r.kappa);
        let first_cert = rows.iter().find(|r| r.certificate == Some(CertificateStatus::FailCertified)).map(|r| r.kappa);
        art.add_json(
            "kappa_prediction.json",
            &KappaSummary { prediction: &prediction, first_breaking_kappa: first_break, first_certified_kappa: first_cert, rows: &rows },
        )?;
        let k = prediction.kappa_star;
        let max = self.kappas.iter().cloned().fold(1.0, f64::max);
        let check = match first_break {
            Some(b) => (
                Some(b >= k / 2.0 && b <= 2.0 * k),
                format!("κ* = {k:.3} (C²·N/G = {:.3}); first κ with C_achieved > {:.4} is {b}", prediction.approximate, self.c),
            ),
            None if max >= 2.0 * k => (Some(false), format!("κ* = {k:.3} but no break up to κ = {max}")),
            None => (None, format!("κ* = {k:.3} lies beyond the grid (max κ = {max})")),
        };
        Ok(Verdict::from_checks(vec![check]))
    }
}

// --------------------------------------------------------- counterexample

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CounterexampleParams {
    #[serde(default = "default_rate")]
    pub rate: f64,
    pub eta: f64,
    pub horizon: f64,
    pub batches: Vec<f64>,
    pub replicas: usize,
    #[serde(default = "default_z")]
    pub z_max: f64,
}

#[derive(Serialize)]
struct CounterexampleRow {
    batch: f64,
    steps: u64,
    sgd: ScalarMoments,
    ngd: ScalarMoments,
}

impl CounterexampleParams {
    pub(crate) fn check(&self) -> Vec<Diagnostic> {
        let mut d = Vec::new();
        check_positive(self.rate, "params.rate", "Poisson rate", &mut d);
        check_positive(self.eta, "params.eta", "learning rate", &mut d);
        check_positive(self.horizon, "params.horizon", "horizon T", &mut d);
        check_positive(self.z_max, "params.z_max", "z_max", &mut d);
        if self.batches.is_empty() {
            d.push(Diagnostic::error("params.batches", "at least one batch size is required"));
        }
        for (i, &b) in self.batches.iter().enumerate() {
            let path = format!("params.batches[{i}]");
            if !(b.is_finite() && b > 0.0) {
                d.push(Diagnostic::error(path, format!("batch size must be positive, got {b}")));
            } else {
                let ratio = self.horizon / b;
                if ratio < 0.5 || (ratio - ratio.round()).abs() > 1e-9 * ratio.max(1.0) {
                    d.push(Diagnostic::error(path, format!("T/B must be a positive integer, got {ratio}")));
                }
            }
        }
        if self.replicas < 300 {
            d.push(Diagnostic::error("params.replicas", "need at least 300 replicas"));
        }
        d
    }

    pub(crate) fn run(&self, seed: u64, art: &mut Artifacts) -> Result<Verdict> {
        let key = StreamKey::new(seed, "counterexample");
        let (eta, t, rate) = (self.eta, self.horizon, self.rate);
        let expected = [-eta * t * rate, eta * eta * t * rate, -eta.powi(3) * t * rate];
        let mut csv = String::from("B,dynamics,statistic,estimate,stderr,expected,z\n");
        let mut rows = Vec::new();
        let mut checks = Vec::new();
        for &b in &self.batches {
            let s = run_poisson_lsr(rate, eta, BatchSize::new(b)?, t, self.replicas, &key.child(format!("B{b}")))?;
            let sgd = scalar_moments(&s.sgd)?;
            let ngd = scalar_moments(&s.ngd)?;
            for (name, m, third) in [("sgd", &sgd, expected[2]), ("ngd", &ngd, 0.0)] {
                let stats = [
                    ("mean", m.mean, m.mean_se, expected[0]),
                    ("variance", m.variance, m.variance_se, expected[1]),
                    ("third_central", m.third_central, m.third_central_se, third),
                ];
                let mut worst = 0.0f64;
                for (stat, est, se, exp) in stats {
                    let z = (est - exp) / se;
                    worst = worst.max(z.abs());
                    let _ = writeln!(csv, "{b},{name},{stat},{est},{se},{exp},{z}");
                }
                checks.push((
                    Some(worst <= self.z_max),
                    format!(
                        "B = {b}, {name}: mean, variance, third central moment within {worst:.2} SE of {:.4}, {:.4e}, {:.4e}",
                        expected[0], expected[1], third
                    ),
                ));
            }
            rows.push(CounterexampleRow { batch: b, steps: s.steps, sgd, ngd });
        }
        art.add("counterexample.csv", csv);
        art.add_json("counterexample.json", &rows)?;
        Ok(Verdict::from_checks(checks))
    }
}

// ------------------------------------------------------------- tail index

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TailIndexParams {
    /// Block length `K₁ = d` of correlated coordinates.
    pub d: usize,
    pub k2: usize,
    pub repetitions: usize,
    pub betas: Vec<f64>,
    #[serde(default = "default_true")]
    pub cauchy: bool,
    #[serde(default = "default_tail_z")]
    pub z_max: f64,
}

#[derive(Serialize)]
struct CauchySummary {
    k1: usize,
    k2: usize,
    repetitions: usize,
    mean: f64,
    stderr: f64,
    z: f64,
}

#[derive(Serialize)]
struct TailSummary<'a> {
    points: &'a [BiasPoint],
    cauchy: Option<CauchySummary>,
}

impl TailIndexParams {
    pub(crate) fn check(&self) -> Vec<Diagnostic> {
        let mut d = Vec::new();
        if self.d < 2 {
            d.push(Diagnostic::error("params.d", "K1 = d must be ≥ 2"));
        }
        if self.k2 < 2 {
            d.push(Diagnostic::error("params.k2", "K2 must be ≥ 2"));
        }
        if self.repetitions < 2 {
            d.push(Diagnostic::error("params.repetitions", "need at least 2 repetitions"));
        }
        for (i, &b) in self.betas.iter().enumerate() {
            if !(0.0..=1.0).contains(&b) {
                d.push(Diagnostic::error(format!("params.betas[{i}]"), format!("β must lie in [0, 1], got {b}")));
            }
        }
        check_positive(self.z_max, "params.z_max", "z_max", &mut d);
        d
    }

    pub(crate) fn run(&self, seed: u64, art: &mut Artifacts) -> Result<Verdict> {
        let key = StreamKey::new(seed, "tail-index");
        let mut points = Vec::new();
        let mut checks = Vec::new();
        for &beta in &self.betas {
            let p = gaussian_bias_experiment(self.d, beta, self.k2, self.repetitions, &key.child(format!("beta{beta}")))?;
            checks.push((
                Some(p.z() <= self.z_max),
                format!("β = {beta}: mean {:.4} ± {:.4} vs expected {:.4}", p.empirical_mean, p.stderr, p.expected),
            ));
            points.push(p);
        }
        let cauchy = if self.cauchy {
            let (mean, stderr) = cauchy_experiment(self.d, self.k2, self.repetitions, &key.child("cauchy"))?;
            let z = (mean - 1.0).abs() / stderr;
            checks.push((Some(z <= self.z_max), format!("Cauchy: mean {mean:.4} ± {stderr:.4} vs 1")));
            Some(CauchySummary { k1: self.d, k2: self.k2, repetitions: self.repetitions, mean, stderr, z })
        } else {
            None
        };
        art.add("tail_index.csv", bias_csv(&points));
        art.add_json("tail_index.json", &TailSummary { points: &points, cauchy })?;
        Ok(Verdict::from_checks(checks))
    }
}
