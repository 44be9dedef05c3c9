//! Declarative experiments: JSON configs, validation, and deterministic runs
//! that write CSV/JSON artifacts plus a manifest.
//!
//! A config has the shape
//!
//! ```json
//! { "kind": "moments", "seed": 7, "output": "out/moments", "assert": true,
//!   "params": { ... } }
//! ```
//!
//! where `params` depends on `kind`.

mod runners;

use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::linalg::Matrix;
use crate::objectives::{
    PoissonLinearObjective, QuadraticGaussianObjective, RayleighDatasetSpec, RayleighQuotientObjective, StochasticObjective,
};

pub use runners::{
    CounterexampleParams, EquilibriumParams, LsrSweepParams, MomentsParams, TailIndexParams, WeakOrderParams,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ExperimentKind {
    Moments,
    WeakOrder,
    Equilibrium,
    LsrSweep,
    Counterexample,
    TailIndex,
}

impl ExperimentKind {
    pub const ALL: [ExperimentKind; 6] =
        [Self::Moments, Self::WeakOrder, Self::Equilibrium, Self::LsrSweep, Self::Counterexample, Self::TailIndex];

    pub fn name(self) -> &'static str {
        match self {
            Self::Moments => "moments",
            Self::WeakOrder => "weak-order",
            Self::Equilibrium => "equilibrium",
            Self::LsrSweep => "lsr-sweep",
            Self::Counterexample => "counterexample",
            Self::TailIndex => "tail-index",
        }
    }

    pub fn description(self) -> &'static str {
        match self {
            Self::Moments => "one-step SVAG/SGD increment moments vs the exact formulas",
            Self::WeakOrder => "weak error of SVAG vs the SDE over l, with log-log order fit",
            Self::Equilibrium => "equilibrium R, G, N, norm identities, C-closeness and SDE failure certificate",
            Self::LsrSweep => "SGD at (κB, κη): LSI closeness, LSI certificate and critical κ prediction",
            Self::Counterexample => "Poisson walker under the linear scaling rule vs its Gaussian counterpart",
            Self::TailIndex => "tail-index estimator on equicorrelated Gaussians and Cauchy samples",
        }
    }
}

impl fmt::Display for ExperimentKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for ExperimentKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Self::ALL
            .into_iter()
            .find(|k| k.name() == s)
            .ok_or_else(|| Error::Config(format!("unknown experiment kind '{s}'")))
    }
}

/// Top-level config document. `params` is decoded according to `kind`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub kind: ExperimentKind,
    #[serde(default)]
    pub seed: u64,
    /// Output directory; `--out` takes precedence.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub output: Option<PathBuf>,
    /// Exit with status 2 when the verdict is a failure.
    #[serde(default)]
    pub assert: bool,
    pub params: serde_json::Value,
}

#[derive(Debug, Clone, PartialEq)]
pub enum Experiment {
    Moments(MomentsParams),
    WeakOrder(WeakOrderParams),
    Equilibrium(EquilibriumParams),
    LsrSweep(LsrSweepParams),
    Counterexample(CounterexampleParams),
    TailIndex(TailIndexParams),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Severity {
    Error,
    Warning,
}

/// One config problem, located by a JSON field path such as `params.l_values[2]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Diagnostic {
    pub severity: Severity,
    pub path: String,
    pub message: String,
}

impl Diagnostic {
    pub fn error(path: impl Into<String>, message: impl Into<String>) -> Self {
        Self { severity: Severity::Error, path: path.into(), message: message.into() }
    }

    pub fn warning(path: impl Into<String>, message: impl Into<String>) -> Self {
        Self { severity: Severity::Warning, path: path.into(), message: message.into() }
    }
}

impl fmt::Display for Diagnostic {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let sev = match self.severity {
            Severity::Error => "error",
            Severity::Warning => "warning",
        };
        if self.path.is_empty() {
            write!(f, "{sev}: {}", self.message)
        } else {
            write!(f, "{sev}: {}: {}", self.path, self.message)
        }
    }
}

fn decode<T: DeserializeOwned>(value: &serde_json::Value, prefix: &str) -> std::result::Result<T, Diagnostic> {
    serde_path_to_error::deserialize(value).map_err(|e| {
        let inner = e.path().to_string();
        let path = if inner == "." { prefix.to_string() } else { format!("{prefix}.{inner}") };
        Diagnostic::error(path, e.into_inner().to_string())
    })
}

/// A parsed config with its source text and directory (for relative paths).
#[derive(Debug, Clone)]
pub struct LoadedConfig {
    pub config: ExperimentConfig,
    pub experiment: Experiment,
    pub source: String,
    pub base_dir: PathBuf,
}

impl LoadedConfig {
    /// Parses and type-checks a config document. Semantic checks are in
    /// [`LoadedConfig::check`].
    pub fn parse(source: &str, base_dir: &Path) -> std::result::Result<Self, Vec<Diagnostic>> {
        let value: serde_json::Value =
            serde_json::from_str(source).map_err(|e| vec![Diagnostic::error("", format!("malformed JSON: {e}"))])?;
        let config: ExperimentConfig = serde_path_to_error::deserialize(&value).map_err(|e| {
            let path = e.path().to_string();
            vec![Diagnostic::error(if path == "." { String::new() } else { path }, e.into_inner().to_string())]
        })?;
        let p = "params";
        let experiment = match config.kind {
            ExperimentKind::Moments => decode(&config.params, p).map(Experiment::Moments),
            ExperimentKind::WeakOrder => decode(&config.params, p).map(Experiment::WeakOrder),
            ExperimentKind::Equilibrium => decode(&config.params, p).map(Experiment::Equilibrium),
            ExperimentKind::LsrSweep => decode(&config.params, p).map(Experiment::LsrSweep),
            ExperimentKind::Counterexample => decode(&config.params, p).map(Experiment::Counterexample),
            ExperimentKind::TailIndex => decode(&config.params, p).map(Experiment::TailIndex),
        }
        .map_err(|d| vec![d])?;
        Ok(Self { config, experiment, source: source.to_string(), base_dir: base_dir.to_path_buf() })
    }

    pub fn load(path: &Path) -> Result<std::result::Result<Self, Vec<Diagnostic>>> {
        let source = std::fs::read_to_string(path)?;
        let base = path.parent().map(Path::to_path_buf).unwrap_or_default();
        Ok(Self::parse(&source, &base))
    }

    /// Semantic checks: every violation, not just the first.
    pub fn check(&self) -> Vec<Diagnostic> {
        match &self.experiment {
            Experiment::Moments(p) => p.check(&self.base_dir),
            Experiment::WeakOrder(p) => p.check(&self.base_dir),
            Experiment::Equilibrium(p) => p.check(&self.base_dir),
            Experiment::LsrSweep(p) => p.check(&self.base_dir),
            Experiment::Counterexample(p) => p.check(),
            Experiment::TailIndex(p) => p.check(),
        }
    }
}

/// All diagnostics for the config at `path`. Fails only if the file cannot be read.
pub fn validate_config(path: &Path) -> Result<Vec<Diagnostic>> {
    Ok(match LoadedConfig::load(path)? {
        Ok(c) => c.check(),
        Err(d) => d,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum DatasetFormat {
    #[default]
    Binary,
    Csv,
}

/// Objective family and parameters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "kebab-case", deny_unknown_fields)]
pub enum ObjectiveSpec {
    Quadratic {
        a: Vec<Vec<f64>>,
        b: Vec<f64>,
        s: Vec<Vec<f64>>,
    },
    Poisson {
        rate: f64,
    },
    /// Synthetic dataset generated from a seed.
    Rayleigh(RayleighDatasetSpec),
    /// Dataset stored on disk; relative paths resolve against the config file.
    RayleighFile {
        path: PathBuf,
        #[serde(default)]
        format: DatasetFormat,
    },
}

pub enum BuiltObjective {
    Quadratic(QuadraticGaussianObjective),
    Poisson(PoissonLinearObjective),
    Rayleigh(RayleighQuotientObjective),
}

impl BuiltObjective {
    pub fn as_dyn(&self) -> &dyn StochasticObjective {
        match self {
            Self::Quadratic(q) => q,
            Self::Poisson(p) => p,
            Self::Rayleigh(r) => r,
        }
    }
}

impl ObjectiveSpec {
    pub fn build(&self, base_dir: &Path) -> Result<BuiltObjective> {
        Ok(match self {
            Self::Quadratic { a, b, s } => BuiltObjective::Quadratic(QuadraticGaussianObjective::new(
                Matrix::from_rows(a)?,
                b.clone(),
                Matrix::from_rows(s)?,
            )?),
            Self::Poisson { rate } => BuiltObjective::Poisson(PoissonLinearObjective::new(*rate)?),
            Self::Rayleigh(spec) => BuiltObjective::Rayleigh(spec.build()?),
            Self::RayleighFile { path, format } => {
                let full = base_dir.join(path);
                BuiltObjective::Rayleigh(match format {
                    DatasetFormat::Binary => RayleighQuotientObjective::read_binary(&full)?,
                    DatasetFormat::Csv => RayleighQuotientObjective::read_csv(&full)?,
                })
            }
        })
    }

    /// Builds the objective, turning failure into a diagnostic at `path`.
    pub(crate) fn checked(&self, base_dir: &Path, path: &str, out: &mut Vec<Diagnostic>) -> Option<BuiltObjective> {
        match self.build(base_dir) {
            Ok(o) => Some(o),
            Err(e) => {
                out.push(Diagnostic::error(path, e.to_string()));
                None
            }
        }
    }
}

/// Outcome of an experiment.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum VerdictStatus {
    Pass,
    Fail,
    Inconclusive,
}

impl fmt::Display for VerdictStatus {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Self::Pass => "pass",
            Self::Fail => "fail",
            Self::Inconclusive => "inconclusive",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Verdict {
    pub status: VerdictStatus,
    pub summary: Vec<String>,
}

impl Verdict {
    pub(crate) fn from_checks(checks: Vec<(Option<bool>, String)>) -> Self {
        let status = if checks.iter().any(|c| c.0 == Some(false)) {
            VerdictStatus::Fail
        } else if checks.iter().any(|c| c.0.is_none()) {
            VerdictStatus::Inconclusive
        } else {
            VerdictStatus::Pass
        };
        let summary = checks
            .into_iter()
            .map(|(ok, msg)| {
                let tag = match ok {
                    Some(true) => "pass",
                    Some(false) => "FAIL",
                    None => "inconclusive",
                };
                format!("[{tag}] {msg}")
            })
            .collect();
        Self { status, summary }
    }
}

/// Files produced by a runner, written in order.
pub(crate) struct Artifacts {
    files: Vec<(String, Vec<u8>)>,
}

impl Artifacts {
    pub(crate) fn new() -> Self {
        Self { files: Vec::new() }
    }

    pub(crate) fn add(&mut self, name: &str, content: impl Into<Vec<u8>>) {
        self.files.push((name.to_string(), content.into()));
    }

    pub(crate) fn add_json<T: Serialize>(&mut self, name: &str, value: &T) -> Result<()> {
        let mut s = serde_json::to_string_pretty(value)?;
        s.push('\n');
        self.add(name, s);
        Ok(())
    }
}

pub const MANIFEST: &str = "manifest.json";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ManifestEntry {
    pub name: String,
    pub sha256: String,
    pub bytes: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub tool: String,
    pub version: String,
    pub experiment: ExperimentKind,
    pub seed: u64,
    pub config_sha256: String,
    pub verdict: Verdict,
    pub files: Vec<ManifestEntry>,
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    Sha256::digest(bytes).iter().map(|b| format!("{b:02x}")).collect()
}

#[derive(Debug, Clone, Default)]
pub struct RunOptions {
    pub out: Option<PathBuf>,
    pub seed: Option<u64>,
    pub overwrite: bool,
}

#[derive(Debug, Clone)]
pub struct RunOutcome {
    pub out_dir: PathBuf,
    pub manifest: Manifest,
    /// Whether the config asked for a non-zero exit on failure.
    pub assert: bool,
}

impl RunOutcome {
    /// 0 on pass or inconclusive, 2 on a failure verdict when asserted.
    pub fn exit_code(&self) -> i32 {
        if self.assert && self.manifest.verdict.status == VerdictStatus::Fail {
            2
        } else {
            0
        }
    }
}

/// Prepares `dir` for writing: creates it, or clears the files listed by a
/// previous manifest when `overwrite` is set. Refuses to touch a non-empty
/// directory without a manifest.
fn prepare_output(dir: &Path, overwrite: bool) -> Result<()> {
    if !check_output(dir, overwrite)? {
        std::fs::create_dir_all(dir)?;
        return Ok(());
    }
    let manifest_path = dir.join(MANIFEST);
    let old: Manifest = serde_json::from_str(&std::fs::read_to_string(&manifest_path)?)?;
    for f in old.files {
        let p = dir.join(&f.name);
        if p.exists() {
            std::fs::remove_file(p)?;
        }
    }
    std::fs::remove_file(manifest_path)?;
    Ok(())
}

/// Non-destructive part of [`prepare_output`]. Returns whether old outputs
/// need clearing.
fn check_output(dir: &Path, overwrite: bool) -> Result<bool> {
    if !dir.exists() || std::fs::read_dir(dir)?.next().is_none() {
        return Ok(false);
    }
    if !overwrite {
        return Err(Error::Config(format!("output directory {} already exists; pass --overwrite to replace it", dir.display())));
    }
    if !dir.join(MANIFEST).exists() {
        return Err(Error::Config(format!(
            "refusing to overwrite {}: it is not empty and has no {MANIFEST}",
            dir.display()
        )));
    }
    Ok(true)
}

/// Runs a parsed config. Semantic errors abort before any output is written.
pub fn run_loaded(loaded: &LoadedConfig, opts: &RunOptions) -> Result<RunOutcome> {
    let errors: Vec<String> = loaded
        .check()
        .into_iter()
        .filter(|d| d.severity == Severity::Error)
        .map(|d| d.to_string())
        .collect();
    if !errors.is_empty() {
        return Err(Error::Config(errors.join("\n")));
    }
    let out_dir = opts
        .out
        .clone()
        .or_else(|| loaded.config.output.as_ref().map(|o| loaded.base_dir.join(o)))
        .ok_or_else(|| Error::Config("no output directory: set \"output\" in the config or pass --out".into()))?;
    check_output(&out_dir, opts.overwrite)?;
    let seed = opts.seed.unwrap_or(loaded.config.seed);
    let mut art = Artifacts::new();
    let base = &loaded.base_dir;
    let verdict = match &loaded.experiment {
        Experiment::Moments(p) => p.run(seed, base, &mut art)?,
        Experiment::WeakOrder(p) => p.run(seed, base, &mut art)?,
        Experiment::Equilibrium(p) => p.run(seed, base, &mut art)?,
        Experiment::LsrSweep(p) => p.run(seed, base, &mut art)?,
        Experiment::Counterexample(p) => p.run(seed, &mut art)?,
        Experiment::TailIndex(p) => p.run(seed, &mut art)?,
    };
    art.add_json("verdict.json", &verdict)?;

    prepare_output(&out_dir, opts.overwrite)?;
    let mut files = Vec::new();
    for (name, bytes) in &art.files {
        std::fs::write(out_dir.join(name), bytes)?;
        files.push(ManifestEntry { name: name.clone(), sha256: sha256_hex(bytes), bytes: bytes.len() as u64 });
    }
    let manifest = Manifest {
        tool: env!("CARGO_PKG_NAME").to_string(),
        version: env!("CARGO_PKG_VERSION").to_string(),
        experiment: loaded.config.kind,
        seed,
        config_sha256: sha256_hex(loaded.source.as_bytes()),
        verdict,
        files,
    };
    let mut text = serde_json::to_string_pretty(&manifest)?;
    text.push('\n');
    std::fs::write(out_dir.join(MANIFEST), text)?;
    Ok(RunOutcome { out_dir, manifest, assert: loaded.config.assert })
}

/// Loads, validates and runs the config at `path`.
pub fn run_experiment(path: &Path, opts: &RunOptions) -> Result<RunOutcome> {
    match LoadedConfig::load(path)? {
        Ok(loaded) => run_loaded(&loaded, opts),
        Err(d) => Err(Error::Config(d.iter().map(|d| d.to_string()).collect::<Vec<_>>().join("\n"))),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn parse(s: &str) -> std::result::Result<LoadedConfig, Vec<Diagnostic>> {
        LoadedConfig::parse(s, Path::new("."))
    }

    #[test]
    fn schema_errors_carry_field_paths() {
        let e = parse(r#"{"kind":"moments","params":{"objective":{"family":"poisson","rate":1},"x":[0],"eta":"fast","l_values":[1]}}"#)
            .unwrap_err();
        assert_eq!(e[0].path, "params.eta");
        let e = parse(r#"{"kind":"moments","sed":1,"params":{}}"#).unwrap_err();
        assert!(e[0].message.contains("unknown field"), "{e:?}");
        let e = parse(r#"{"kind":"nope","params":{}}"#).unwrap_err();
        assert_eq!(e[0].path, "kind");
        let e = parse(
            r#"{"kind":"equilibrium","params":{"objective":{"family":"rayleigh","dim":4,"samples":10,"seed":1,"typo":3},
                "etas":[0.1],"lambda":0.01,"steps":100,"replicas":2}}"#,
        )
        .unwrap_err();
        assert!(e[0].path.starts_with("params.objective"), "{e:?}");
        assert!(parse("{").is_err());
    }

    #[test]
    fn kinds_round_trip() {
        for k in ExperimentKind::ALL {
            assert_eq!(k.name().parse::<ExperimentKind>().unwrap(), k);
            assert_eq!(serde_json::to_string(&k).unwrap(), format!("\"{}\"", k.name()));
        }
    }

    #[test]
    fn verdict_aggregation() {
        let v = Verdict::from_checks(vec![(Some(true), "a".into()), (None, "b".into())]);
        assert_eq!(v.status, VerdictStatus::Inconclusive);
        let v = Verdict::from_checks(vec![(Some(false), "a".into()), (None, "b".into())]);
        assert_eq!(v.status, VerdictStatus::Fail);
        assert_eq!(v.summary[0], "[FAIL] a");
    }
}
