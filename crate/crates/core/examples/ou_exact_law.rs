//! Exact Gaussian law of the OU process matching SGD on a quadratic, against
//! a long SGD run with a small learning rate.

use sdelab::integrators::{run_replicas, DynamicsConfig, IntegratorKind};
use sdelab::objectives::{BatchSize, QuadraticGaussianObjective};

fn main() -> sdelab::Result<()> {
    let obj = QuadraticGaussianObjective::diagonal(&[1.0, 0.5], vec![0.2, -0.1], &[1.0, 3.0])?;
    let (eta, horizon, x0) = (0.02, 2.0, [1.0, -1.0]);
    let law = obj.ou_law(&x0, horizon, eta, BatchSize::default())?;
    println!("OU mean {:?}", law.mean);
    println!("OU covariance diag [{:.5}, {:.5}]", law.covariance[(0, 0)], law.covariance[(1, 1)]);

    let cfg = DynamicsConfig::new(eta, (horizon / eta).round() as u64);
    let runs = run_replicas(&obj, IntegratorKind::Sgd, &cfg, &x0, 20_000)?;
    let n = runs.len() as f64;
    let mut mean = [0.0; 2];
    for r in &runs {
        for (m, v) in mean.iter_mut().zip(&r.final_x) {
            *m += v / n;
        }
    }
    let mut var = [0.0; 2];
    for r in &runs {
        for i in 0..2 {
            var[i] += (r.final_x[i] - mean[i]).powi(2) / (n - 1.0);
        }
    }
    println!("SGD mean [{:.5}, {:.5}], variance [{:.5}, {:.5}]", mean[0], mean[1], var[0], var[1]);
    Ok(())
}
