//! Poisson walker under the linear scaling rule. SGD keeps a B-independent,
//! nonzero third central moment; its Gaussian counterpart does not.

use sdelab::integrators::run_poisson_lsr;
use sdelab::moments::scalar_moments;
use sdelab::objectives::BatchSize;
use sdelab::rng::StreamKey;

fn main() -> sdelab::Result<()> {
    let (rate, eta, horizon): (f64, f64, f64) = (1.0, 0.01, 100.0);
    let key = StreamKey::new(7, "poisson");
    println!("expected: mean {:.4}, variance {:.3e}, SGD third {:.3e}", -eta * horizon * rate, eta * eta * horizon * rate, -eta.powi(3) * horizon * rate);
    println!("{:>4} {:>5} {:>10} {:>11} {:>22}", "B", "kind", "mean", "variance", "third central ± SE");
    for b in [1.0, 2.0, 5.0, 10.0] {
        let s = run_poisson_lsr(rate, eta, BatchSize::new(b)?, horizon, 20_000, &key.child(b))?;
        for (name, xs) in [("sgd", &s.sgd), ("ngd", &s.ngd)] {
            let m = scalar_moments(xs)?;
            println!(
                "{b:>4} {name:>5} {:>10.5} {:>11.4e} {:>11.3e} ± {:.1e}",
                m.mean, m.variance, m.third_central, m.third_central_se
            );
        }
    }
    Ok(())
}
