//! Discrete dynamics: SGD, SVAG, noisy GD / Euler–Maruyama on the first-order
//! SDE, Euler–Maruyama on the second-order SDE, and the Poisson walker.
//!
//! A trajectory step is one unit `η` of continuous time. SGD makes one update
//! per step, SVAG makes `l` updates of size `η/l`, and the SDE integrators make
//! `η/h` Euler–Maruyama substeps of size `h`.

use std::fmt;
use std::io::Write;
use std::path::Path;
use std::str::FromStr;

use rand::RngCore;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::linalg::norm_sq;
use crate::objectives::{BatchSampler, BatchSize, PoissonLinearObjective, SamplingMode, StochasticObjective};
use crate::rng::{StreamKey, StreamRng};

/// Default ratio `η/h` for the second-order SDE.
pub const SDE2_SUBSTEPS: u64 = 20;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum IntegratorKind {
    Sgd,
    Svag,
    /// Euler–Maruyama on `dX = −(∇L + λX)dt + (ηΣ)^{1/2} dW`. With the default
    /// substep `h = η` this is noisy gradient descent.
    Ngd,
    /// Euler–Maruyama on the second-order SDE.
    Sde2,
}

impl IntegratorKind {
    pub const ALL: [IntegratorKind; 4] = [Self::Sgd, Self::Svag, Self::Ngd, Self::Sde2];

    pub fn name(self) -> &'static str {
        match self {
            Self::Sgd => "sgd",
            Self::Svag => "svag",
            Self::Ngd => "ngd",
            Self::Sde2 => "sde2",
        }
    }
}

impl fmt::Display for IntegratorKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for IntegratorKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Self::ALL
            .into_iter()
            .find(|k| k.name() == s)
            .ok_or_else(|| invalid(format!("unknown integrator '{s}' (expected sgd, svag, ngd or sde2)")))
    }
}

fn one_u32() -> u32 {
    1
}

fn one_u64() -> u64 {
    1
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DynamicsConfig {
    pub eta: f64,
    #[serde(default)]
    pub lambda: f64,
    #[serde(default)]
    pub batch: BatchSize,
    /// SVAG parameter `l`.
    #[serde(default = "one_u32")]
    pub svag_l: u32,
    /// Number of trajectory steps, each of duration `η`.
    pub steps: u64,
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub mode: SamplingMode,
    #[serde(default = "one_u64")]
    pub record_every: u64,
    /// Euler–Maruyama substep `h` for the SDE integrators. Defaults to `η`
    /// for [`IntegratorKind::Ngd`] and `η/20` for [`IntegratorKind::Sde2`].
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub substep: Option<f64>,
}

impl DynamicsConfig {
    pub fn new(eta: f64, steps: u64) -> Self {
        Self {
            eta,
            lambda: 0.0,
            batch: BatchSize::default(),
            svag_l: 1,
            steps,
            seed: 0,
            mode: SamplingMode::WithReplacement,
            record_every: 1,
            substep: None,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.eta.is_finite() && self.eta > 0.0) {
            return Err(invalid(format!("learning rate must be positive, got {}", self.eta)));
        }
        if !(self.lambda.is_finite() && self.lambda >= 0.0) {
            return Err(invalid(format!("weight decay must be ≥ 0, got {}", self.lambda)));
        }
        if self.svag_l < 1 {
            return Err(invalid("SVAG parameter l ≥ 1 required"));
        }
        if self.record_every < 1 {
            return Err(invalid("record_every must be ≥ 1"));
        }
        if let Some(h) = self.substep {
            if !(h.is_finite() && h > 0.0 && h <= self.eta) {
                return Err(invalid(format!("substep must satisfy 0 < h ≤ η, got {h}")));
            }
        }
        Ok(())
    }

    /// Updates per trajectory step for the given dynamics.
    pub fn substeps(&self, kind: IntegratorKind) -> u64 {
        match kind {
            IntegratorKind::Sgd => 1,
            IntegratorKind::Svag => self.svag_l as u64,
            IntegratorKind::Ngd => self.substep.map_or(1, |h| (self.eta / h).round().max(1.0) as u64),
            IntegratorKind::Sde2 => self.substep.map_or(SDE2_SUBSTEPS, |h| (self.eta / h).round().max(1.0) as u64),
        }
    }

    /// Effective update size: `η` for SGD, `η/l` for SVAG, the substep `h`
    /// for the SDE integrators (rounded so that `η/h` is an integer).
    pub fn step_size(&self, kind: IntegratorKind) -> f64 {
        self.eta / self.substeps(kind) as f64
    }
}

/// `x − η(∇L_γ(x) + λx)`.
pub fn step_sgd(
    obj: &dyn StochasticObjective,
    x: &[f64],
    cfg: &DynamicsConfig,
    sampler: &mut BatchSampler,
    rng: &mut dyn RngCore,
) -> Result<Vec<f64>> {
    let g = obj.sample_gradient(x, cfg.batch, sampler, rng)?.gradient;
    let eta = cfg.eta;
    Ok(x.iter().zip(&g).map(|(xi, gi)| xi - eta * (gi + cfg.lambda * xi)).collect())
}

/// SVAG coefficients `a± = (1 ± √(2l−1))/2`.
pub fn svag_coefficients(l: u32) -> (f64, f64) {
    let r = (2.0 * l as f64 - 1.0).sqrt();
    ((1.0 + r) / 2.0, (1.0 - r) / 2.0)
}

/// `x − (η/l)(a₊g₁ + a₋g₂ + λx)` with two independent batch gradients.
///
/// For `l = 1` the second draw is skipped, so the update and the random
/// stream coincide with [`step_sgd`].
pub fn step_svag(
    obj: &dyn StochasticObjective,
    x: &[f64],
    cfg: &DynamicsConfig,
    sampler: &mut BatchSampler,
    rng: &mut dyn RngCore,
) -> Result<Vec<f64>> {
    let l = cfg.svag_l;
    if l < 1 {
        return Err(invalid("SVAG parameter l ≥ 1 required"));
    }
    let (ap, am) = svag_coefficients(l);
    let mut g = obj.sample_gradient(x, cfg.batch, sampler, rng)?.gradient;
    if l > 1 {
        let g2 = obj.sample_gradient(x, cfg.batch, sampler, rng)?.gradient;
        for (a, b) in g.iter_mut().zip(&g2) {
            *a = ap * *a + am * b;
        }
    } else {
        for a in g.iter_mut() {
            *a *= ap;
        }
    }
    let h = cfg.eta / l as f64;
    Ok(x.iter().zip(&g).map(|(xi, gi)| xi - h * (gi + cfg.lambda * xi)).collect())
}

/// One Euler–Maruyama substep of the first-order SDE:
/// `x − h(∇L(x) + λx) + √(hη) Σ^{1/2}(x) z`.
pub fn step_ngd(obj: &dyn StochasticObjective, x: &[f64], cfg: &DynamicsConfig, rng: &mut dyn RngCore) -> Result<Vec<f64>> {
    let h = cfg.step_size(IntegratorKind::Ngd);
    let g = obj.expected_gradient(x)?;
    let noise = obj.sample_gaussian_noise(x, cfg.batch, rng)?;
    let s = (h * cfg.eta).sqrt();
    Ok((0..x.len()).map(|i| x[i] - h * (g[i] + cfg.lambda * x[i]) + s * noise[i]).collect())
}

/// One Euler–Maruyama substep of the second-order SDE, drift
/// `−(∇L + (η/2)∇²L∇L) − λ(1 + ηλ/2)x`, diffusion `(ηΣ)^{1/2}`.
pub fn step_sde2(obj: &dyn StochasticObjective, x: &[f64], cfg: &DynamicsConfig, rng: &mut dyn RngCore) -> Result<Vec<f64>> {
    let h = cfg.step_size(IntegratorKind::Sde2);
    let eta = cfg.eta;
    let g = obj.expected_gradient(x)?;
    let hg = obj.hessian_vector_product(x, &g)?;
    let noise = obj.sample_gaussian_noise(x, cfg.batch, rng)?;
    let decay = cfg.lambda * (1.0 + eta * cfg.lambda / 2.0);
    let s = (h * eta).sqrt();
    Ok((0..x.len())
        .map(|i| x[i] - h * (g[i] + 0.5 * eta * hg[i] + decay * x[i]) + s * noise[i])
        .collect())
}

/// Test functions evaluated at one iterate.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TestFunctionSample {
    pub step: u64,
    pub sq_norm: f64,
    pub sq_grad_norm: f64,
    /// `Tr Σ^B(x)` at the configured batch size.
    pub noise_trace: f64,
    pub loss: f64,
    /// `|x_k − x_{k−1}|²` over the last update; absent at the initial point.
    pub sq_displacement: Option<f64>,
}

impl TestFunctionSample {
    pub fn evaluate(
        obj: &dyn StochasticObjective,
        x: &[f64],
        batch: BatchSize,
        step: u64,
        sq_displacement: Option<f64>,
    ) -> Result<Self> {
        Ok(Self {
            step,
            sq_norm: norm_sq(x),
            sq_grad_norm: norm_sq(&obj.expected_gradient(x)?),
            noise_trace: obj.noise_trace(x, batch)?,
            loss: obj.loss(x)?,
            sq_displacement,
        })
    }

    fn csv_row(&self) -> String {
        let disp = self.sq_displacement.map(|d| d.to_string()).unwrap_or_default();
        format!("{},{},{},{},{},{}", self.step, self.sq_norm, self.sq_grad_norm, self.noise_trace, self.loss, disp)
    }
}

pub const TRAJECTORY_CSV_HEADER: &str = "step,sq_norm,sq_grad_norm,noise_trace,loss,sq_displacement";

/// Steps one of the four dynamics forward in units of `η`.
pub struct Integrator<'a> {
    obj: &'a dyn StochasticObjective,
    kind: IntegratorKind,
    cfg: &'a DynamicsConfig,
    sampler: BatchSampler,
    substeps: u64,
}

impl<'a> Integrator<'a> {
    pub fn new(obj: &'a dyn StochasticObjective, kind: IntegratorKind, cfg: &'a DynamicsConfig) -> Result<Self> {
        cfg.validate()?;
        Ok(Self { obj, kind, cfg, sampler: BatchSampler::new(cfg.mode), substeps: cfg.substeps(kind) })
    }

    /// One update (a single SVAG update or EM substep).
    pub fn update(&mut self, x: &[f64], rng: &mut dyn RngCore) -> Result<Vec<f64>> {
        match self.kind {
            IntegratorKind::Sgd => step_sgd(self.obj, x, self.cfg, &mut self.sampler, rng),
            IntegratorKind::Svag => step_svag(self.obj, x, self.cfg, &mut self.sampler, rng),
            IntegratorKind::Ngd => step_ngd(self.obj, x, self.cfg, rng),
            IntegratorKind::Sde2 => step_sde2(self.obj, x, self.cfg, rng),
        }
    }

    /// Advances `x` by one trajectory step. Returns the squared length of the
    /// last update, or `None` if an iterate became non-finite, in which case
    /// `x` keeps the last finite value.
    pub fn advance(&mut self, x: &mut Vec<f64>, rng: &mut dyn RngCore) -> Result<Option<f64>> {
        let mut disp = 0.0;
        for _ in 0..self.substeps {
            let next = self.update(x, rng)?;
            if !next.iter().all(|v| v.is_finite()) {
                return Ok(None);
            }
            disp = next.iter().zip(x.iter()).map(|(a, b)| (a - b) * (a - b)).sum();
            *x = next;
        }
        Ok(Some(disp))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Trajectory {
    pub kind: IntegratorKind,
    pub config: DynamicsConfig,
    pub samples: Vec<TestFunctionSample>,
    /// Last finite iterate.
    pub final_x: Vec<f64>,
    /// Step at which a non-finite iterate appeared.
    pub diverged_at: Option<u64>,
}

impl Trajectory {
    pub fn diverged(&self) -> bool {
        self.diverged_at.is_some()
    }

    pub fn to_csv(&self) -> String {
        let mut s = String::from(TRAJECTORY_CSV_HEADER);
        s.push('\n');
        for r in &self.samples {
            s.push_str(&r.csv_row());
            s.push('\n');
        }
        s
    }

    pub fn write_csv(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_csv())?;
        Ok(())
    }
}

/// Long-format CSV with a leading `replica` column.
pub fn trajectories_to_long_csv(trajectories: &[Trajectory]) -> String {
    let mut s = format!("replica,{TRAJECTORY_CSV_HEADER}\n");
    for (i, t) in trajectories.iter().enumerate() {
        for r in &t.samples {
            s.push_str(&format!("{i},{}\n", r.csv_row()));
        }
    }
    s
}

pub fn write_long_csv(trajectories: &[Trajectory], path: &Path) -> Result<()> {
    let mut f = std::io::BufWriter::new(std::fs::File::create(path)?);
    f.write_all(trajectories_to_long_csv(trajectories).as_bytes())?;
    f.flush()?;
    Ok(())
}

/// Stream key shared by all trajectory runners, so that SGD and SVAG with
/// `l = 1` see the same draws.
pub fn trajectory_key(seed: u64) -> StreamKey {
    StreamKey::new(seed, "trajectory")
}

/// Runs `cfg.steps` steps from `x0` on replica stream 0.
pub fn run_trajectory(
    obj: &dyn StochasticObjective,
    kind: IntegratorKind,
    cfg: &DynamicsConfig,
    x0: &[f64],
) -> Result<Trajectory> {
    let mut rng = trajectory_key(cfg.seed).stream(0);
    run_trajectory_with(obj, kind, cfg, x0, &mut rng)
}

pub fn run_trajectory_with(
    obj: &dyn StochasticObjective,
    kind: IntegratorKind,
    cfg: &DynamicsConfig,
    x0: &[f64],
    rng: &mut dyn RngCore,
) -> Result<Trajectory> {
    let mut integ = Integrator::new(obj, kind, cfg)?;
    let mut x = x0.to_vec();
    let mut samples = vec![TestFunctionSample::evaluate(obj, &x, cfg.batch, 0, None)?];
    let mut diverged_at = None;
    for step in 1..=cfg.steps {
        match integ.advance(&mut x, rng)? {
            Some(disp) => {
                if step % cfg.record_every == 0 {
                    samples.push(TestFunctionSample::evaluate(obj, &x, cfg.batch, step, Some(disp))?);
                }
            }
            None => {
                diverged_at = Some(step);
                break;
            }
        }
    }
    Ok(Trajectory { kind, config: cfg.clone(), samples, final_x: x, diverged_at })
}

/// Independent replicas, replica `r` on stream `r`. Output order (and every
/// number in it) does not depend on the thread count.
pub fn run_replicas(
    obj: &dyn StochasticObjective,
    kind: IntegratorKind,
    cfg: &DynamicsConfig,
    x0: &[f64],
    replicas: usize,
) -> Result<Vec<Trajectory>> {
    let key = trajectory_key(cfg.seed);
    (0..replicas)
        .into_par_iter()
        .map(|r| {
            let mut rng: StreamRng = key.stream(r as u64);
            run_trajectory_with(obj, kind, cfg, x0, &mut rng)
        })
        .collect()
}

/// Final iterates of the Poisson walker and its Gaussian counterpart.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PoissonLsrSamples {
    pub rate: f64,
    pub eta: f64,
    pub batch: f64,
    pub horizon: f64,
    pub steps: u64,
    /// SGD with learning rate `Bη`, batch `B`, started at 0.
    pub sgd: Vec<f64>,
    /// Noisy GD with the same learning rate and batch.
    pub ngd: Vec<f64>,
}

/// Runs SGD with learning rate `Bη` for `T/B` steps on the Poisson objective
/// from `x0 = 0`, together with the matching noisy GD, over `replicas`
/// independent streams.
pub fn run_poisson_lsr(
    rate: f64,
    eta: f64,
    batch: BatchSize,
    horizon: f64,
    replicas: usize,
    key: &StreamKey,
) -> Result<PoissonLsrSamples> {
    let obj = PoissonLinearObjective::new(rate)?;
    if !(horizon.is_finite() && horizon > 0.0) {
        return Err(invalid(format!("horizon T must be positive, got {horizon}")));
    }
    let ratio = horizon / batch.value();
    let steps = ratio.round();
    if steps < 1.0 || (ratio - steps).abs() > 1e-9 * ratio.max(1.0) {
        return Err(invalid(format!("T/B must be a positive integer, got {ratio}")));
    }
    let steps = steps as u64;
    let mut cfg = DynamicsConfig::new(batch.value() * eta, steps);
    cfg.batch = batch;
    cfg.validate()?;
    let run = |kind: IntegratorKind| -> Result<Vec<f64>> {
        let k = key.child(kind.name());
        (0..replicas)
            .into_par_iter()
            .map(|r| {
                let mut rng = k.stream(r as u64);
                let mut sampler = BatchSampler::new(SamplingMode::WithReplacement);
                let mut x = vec![0.0];
                for _ in 0..steps {
                    x = match kind {
                        IntegratorKind::Sgd => step_sgd(&obj, &x, &cfg, &mut sampler, &mut rng)?,
                        _ => step_ngd(&obj, &x, &cfg, &mut rng)?,
                    };
                }
                Ok(x[0])
            })
            .collect()
    };
    Ok(PoissonLsrSamples {
        rate,
        eta,
        batch: batch.value(),
        horizon,
        steps,
        sgd: run(IntegratorKind::Sgd)?,
        ngd: run(IntegratorKind::Ngd)?,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::Matrix;
    use crate::objectives::{QuadraticGaussianObjective, RayleighDatasetSpec};

    fn quad(a: f64, s: f64) -> QuadraticGaussianObjective {
        QuadraticGaussianObjective::diagonal(&[a], vec![0.0], &[s]).unwrap()
    }

    #[test]
    fn sgd_deterministic_cases() {
        let q = QuadraticGaussianObjective::new(Matrix::identity(2), vec![0.0, 0.0], Matrix::zeros(2, 2)).unwrap();
        let cfg = DynamicsConfig::new(0.1, 1);
        let mut rng = StreamKey::new(0, "t").stream(0);
        let mut s = BatchSampler::new(SamplingMode::WithReplacement);
        let x = step_sgd(&q, &[1.0, 0.0], &cfg, &mut s, &mut rng).unwrap();
        assert_eq!(x, vec![0.9, 0.0]);

        let zero = quad(0.0, 0.0);
        let mut cfg = DynamicsConfig::new(1.0, 1);
        cfg.lambda = 0.5;
        assert_eq!(step_sgd(&zero, &[2.0], &cfg, &mut s, &mut rng).unwrap(), vec![1.0]);
    }

    #[test]
    fn sde2_drift_example() {
        let q = quad(1.0, 0.0);
        let cfg = DynamicsConfig::new(0.2, 1);
        let mut rng = StreamKey::new(0, "t").stream(0);
        let x = step_sde2(&q, &[1.0], &cfg, &mut rng).unwrap();
        assert!((x[0] - 0.989).abs() < 1e-15);
    }

    #[test]
    fn ngd_without_noise_is_gd() {
        let q = quad(2.0, 0.0);
        let mut cfg = DynamicsConfig::new(0.1, 1);
        cfg.lambda = 0.5;
        let mut rng = StreamKey::new(0, "t").stream(0);
        let x = step_ngd(&q, &[1.0], &cfg, &mut rng).unwrap();
        assert!((x[0] - (1.0 - 0.1 * 2.5)).abs() < 1e-15);
    }

    #[test]
    fn svag_coefficients_sum_and_square_sum() {
        for l in [1, 2, 5, 16, 100] {
            let (a, b) = svag_coefficients(l);
            assert!((a + b - 1.0).abs() < 1e-14);
            assert!((a * a + b * b - l as f64).abs() < 1e-12 * l as f64);
        }
        assert_eq!(svag_coefficients(1), (1.0, 0.0));
    }

    #[test]
    fn svag_with_l_one_is_sgd_bitwise() {
        let r = RayleighDatasetSpec::new(6, 40, 1).build().unwrap();
        let mut cfg = DynamicsConfig::new(0.3, 50);
        cfg.lambda = 0.05;
        cfg.batch = BatchSize::new(3.0).unwrap();
        let x0 = [1.0, 0.5, -0.2, 0.3, 0.0, 1.0];
        let a = run_trajectory(&r, IntegratorKind::Sgd, &cfg, &x0).unwrap();
        let b = run_trajectory(&r, IntegratorKind::Svag, &cfg, &x0).unwrap();
        assert_eq!(a.final_x, b.final_x);
        assert_eq!(a.to_csv(), b.to_csv());
    }

    #[test]
    fn zero_steps_records_the_start() {
        let q = quad(1.0, 1.0);
        let t = run_trajectory(&q, IntegratorKind::Sgd, &DynamicsConfig::new(0.1, 0), &[2.0]).unwrap();
        assert_eq!(t.samples.len(), 1);
        assert_eq!(t.samples[0].sq_norm, 4.0);
        assert_eq!(t.final_x, vec![2.0]);
    }

    #[test]
    fn record_stride_and_divergence_flag() {
        let q = quad(1.0, 1.0);
        let mut cfg = DynamicsConfig::new(0.1, 10);
        cfg.record_every = 3;
        let t = run_trajectory(&q, IntegratorKind::Sgd, &cfg, &[1.0]).unwrap();
        let steps: Vec<u64> = t.samples.iter().map(|s| s.step).collect();
        assert_eq!(steps, vec![0, 3, 6, 9]);
        // |1 − ηa| = 9 blows up
        let cfg = DynamicsConfig::new(10.0, 2000);
        let t = run_trajectory(&q, IntegratorKind::Sgd, &cfg, &[1.0]).unwrap();
        assert!(t.diverged());
        assert!(t.final_x[0].is_finite());
    }

    #[test]
    fn substep_rounding() {
        let mut cfg = DynamicsConfig::new(0.1, 1);
        assert_eq!(cfg.substeps(IntegratorKind::Ngd), 1);
        assert_eq!(cfg.substeps(IntegratorKind::Sde2), 20);
        cfg.substep = Some(0.1 / 7.0);
        assert_eq!(cfg.substeps(IntegratorKind::Ngd), 7);
        cfg.svag_l = 4;
        assert_eq!(cfg.substeps(IntegratorKind::Svag), 4);
        cfg.substep = Some(0.2);
        assert!(cfg.validate().is_err());
    }

    #[test]
    fn poisson_lsr_rejects_fractional_step_counts() {
        let key = StreamKey::new(0, "p");
        assert!(run_poisson_lsr(1.0, 0.1, BatchSize::new(3.0).unwrap(), 10.0, 4, &key).is_err());
        let s = run_poisson_lsr(1.0, 0.1, BatchSize::new(0.5).unwrap(), 10.0, 4, &key).unwrap();
        assert_eq!(s.steps, 20);
    }
}
