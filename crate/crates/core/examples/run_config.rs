//! Runs an experiment config programmatically, the same way `sdelab run`
//! does, writing artifacts and a manifest to a temporary directory.
//!
//! ```text
//! cargo run --release --example run_config -- configs/smoke_moments.json
//! ```

use std::path::PathBuf;

use sdelab::experiment::{run_experiment, RunOptions};

fn main() -> sdelab::Result<()> {
    let config = std::env::args()
        .nth(1)
        .map(PathBuf::from)
        .unwrap_or_else(|| PathBuf::from(concat!(env!("CARGO_MANIFEST_DIR"), "/../../configs/smoke_moments.json")));
    let out = std::env::temp_dir().join("sdelab-run-config");
    let outcome = run_experiment(&config, &RunOptions { out: Some(out), seed: None, overwrite: true })?;
    println!("{} -> {}", outcome.manifest.verdict.status, outcome.out_dir.display());
    for f in &outcome.manifest.files {
        println!("  {:<20} {:>8} bytes  {}", f.name, f.bytes, &f.sha256[..16]);
    }
    Ok(())
}
