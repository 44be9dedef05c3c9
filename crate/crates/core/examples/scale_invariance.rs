//! Checks the scale-invariance properties of the Rayleigh-quotient objective
//! at a random point: orthogonality, gradient homogeneity and the noise
//! annihilating x.

use rand::Rng;
use sdelab::objectives::{BatchSize, RayleighDatasetSpec, StochasticObjective};
use sdelab::rng::StreamKey;

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn main() -> sdelab::Result<()> {
    let obj = RayleighDatasetSpec::new(10, 200, 1).build()?;
    let mut rng = StreamKey::new(0, "scale").stream(0);
    let x: Vec<f64> = (0..10).map(|_| rng.random_range(-1.0..1.0)).collect();
    let g = obj.expected_gradient(&x)?;
    let x2: Vec<f64> = x.iter().map(|v| 2.0 * v).collect();
    let g2 = obj.expected_gradient(&x2)?;
    let sigma = obj.noise_covariance(&x, BatchSize::new(4.0)?)?;

    let gn = dot(&g, &g).sqrt();
    let xn = dot(&x, &x).sqrt();
    println!("<x, grad>/(|x||grad|)    = {:.2e}", dot(&x, &g) / (xn * gn));
    let diff: f64 = g.iter().zip(&g2).map(|(a, b)| (2.0 * b - a).powi(2)).sum::<f64>().sqrt();
    println!("|2 grad(2x) - grad(x)|/|grad| = {:.2e}", diff / gn);
    let sx = sigma.matvec(&x);
    println!("x^T Sigma x / (|x|^2 tr Sigma) = {:.2e}", dot(&x, &sx) / (xn * xn * sigma.trace()));
    println!("L(x) = {:.6}, L(3x) = {:.6}", obj.loss(&x)?, obj.loss(&x.iter().map(|v| 3.0 * v).collect::<Vec<_>>())?);
    Ok(())
}
