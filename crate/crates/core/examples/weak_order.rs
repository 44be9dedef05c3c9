//! Weak error of SVAG against the exact OU expectation as l grows, with the
//! fitted log-log order.

use sdelab::objectives::{BatchSize, QuadraticGaussianObjective, SamplingMode};
use sdelab::rng::StreamKey;
use sdelab::weakorder::{analytic_ou_expectation, measure_weak_error, PolynomialTestFunction, Reference, WeakOrderSetup};

fn main() -> sdelab::Result<()> {
    // dX = -X dt + dW once ηS = 1.
    let obj = QuadraticGaussianObjective::diagonal(&[1.0], vec![0.0], &[2.0])?;
    let g = PolynomialTestFunction::squared_norm(1)?;
    let setup = WeakOrderSetup {
        x0: vec![0.0],
        horizon: 1.0,
        eta: 0.5,
        lambda: 0.0,
        batch: BatchSize::default(),
        mode: SamplingMode::WithReplacement,
        l_values: vec![1, 2, 4, 8, 16],
        replicas: 200_000,
    };
    let exact = analytic_ou_expectation(&obj, &g, &setup.x0, setup.horizon, setup.eta, setup.batch)?;
    println!("E X_T^2 = {exact:.6}");
    let curve = measure_weak_error(&obj, &g, &setup, &Reference::Exact { value: exact }, &StreamKey::new(3, "weak"))?;
    print!("{}", curve.to_csv());
    match &curve.fit {
        Some(f) => println!("slope {:.3}, 95% CI [{:.3}, {:.3}] from {} points", f.slope, f.ci_low, f.ci_high, f.points_used),
        None => println!("no fit: {}", curve.inconclusive.as_deref().unwrap_or("")),
    }
    Ok(())
}
