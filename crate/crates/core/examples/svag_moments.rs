//! One-step SVAG increment moments on a 3-d quadratic, Monte Carlo vs the
//! exact formulas, for a few values of l.

use sdelab::integrators::{DynamicsConfig, IntegratorKind};
use sdelab::linalg::Matrix;
use sdelab::moments::{compare_moments, estimate_one_step_moments, theoretical_svag_moments, DEFAULT_Z_MAX};
use sdelab::objectives::QuadraticGaussianObjective;
use sdelab::rng::StreamKey;

fn main() -> sdelab::Result<()> {
    let a = Matrix::from_rows(&[vec![2.0, 0.3, 0.0], vec![0.3, 1.0, 0.1], vec![0.0, 0.1, 0.5]])?;
    let s = Matrix::from_diag(&[1.0, 2.0, 4.0]);
    let obj = QuadraticGaussianObjective::new(a, vec![0.5, -1.0, 0.0], s)?;
    let x = [0.5, 0.2, -0.3];
    let key = StreamKey::new(42, "svag-moments");

    for l in [1, 2, 8, 32] {
        let mut cfg = DynamicsConfig::new(0.1, 1);
        cfg.svag_l = l;
        let est = estimate_one_step_moments(IntegratorKind::Svag, &obj, &x, &cfg, 200_000, &key.child(l))?;
        let theory = theoretical_svag_moments(&obj, &x, &cfg)?;
        let report = compare_moments(&est, &theory, DEFAULT_Z_MAX)?;
        println!("l = {l}");
        print!("{}", report.table());
    }
    Ok(())
}
