//! Tail-index estimator: bias on correlated Gaussians and its value on
//! Cauchy samples.

use sdelab::rng::StreamKey;
use sdelab::tailindex::{bias_csv, cauchy_experiment, gaussian_bias_experiment};

fn main() -> sdelab::Result<()> {
    let key = StreamKey::new(8, "tail");
    let points = [0.0, 0.25, 0.5, 0.75, 1.0]
        .iter()
        .map(|&b| gaussian_bias_experiment(100, b, 1000, 50, &key.child(b)))
        .collect::<sdelab::Result<Vec<_>>>()?;
    print!("{}", bias_csv(&points));
    let (m, se) = cauchy_experiment(100, 1000, 50, &key.child("cauchy"))?;
    println!("Cauchy: 1/alpha = {m:.4} ± {se:.4}");
    Ok(())
}
