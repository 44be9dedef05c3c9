//! Sweeps the learning rate and compares measured C-closeness of SGD and
//! noisy GD with the SDE failure certificate.

use sdelab::equilibrium::{c_closeness, estimate_equilibrium, sde_failure_certificate, EquilibriumPlan, DEFAULT_C};
use sdelab::integrators::{DynamicsConfig, IntegratorKind};
use sdelab::objectives::RayleighDatasetSpec;

fn main() -> sdelab::Result<()> {
    let mut spec = RayleighDatasetSpec::new(10, 200, 1);
    spec.diag_noise = 0.3;
    spec.extra_atoms = 4;
    spec.extra_scale = 0.5;
    let obj = spec.build()?;
    let x0 = vec![1.0; 10];
    let lambda = 0.01;
    let plan = EquilibriumPlan { burn_in: None, replicas: 4 };

    println!("{:>6} {:>10} {:>16}", "eta", "C_achieved", "certificate");
    for eta in [0.5, 2.0, 5.0, 20.0, 50.0] {
        let steps = ((2.0 / (eta * lambda)) as u64).max(5_000);
        let mut cfg = DynamicsConfig::new(eta, steps);
        cfg.lambda = lambda;
        cfg.record_every = 10;
        cfg.substep = Some(eta / 20.0);
        let sgd = estimate_equilibrium(&obj, IntegratorKind::Sgd, &cfg, &x0, plan)?;
        let ngd = estimate_equilibrium(&obj, IntegratorKind::Ngd, &cfg, &x0, plan)?;
        let close = c_closeness(&sgd, &ngd, DEFAULT_C)?;
        let cert = sde_failure_certificate(Some(&ngd), Some(&sgd), eta, DEFAULT_C)?;
        println!("{eta:>6} {:>10.3} {:>16}", close.c_achieved, cert.status);
    }
    Ok(())
}
