//! Predicts the batch-scaling factor at which the linear scaling rule breaks
//! from one baseline run, then checks a few scaled runs.

use sdelab::equilibrium::{estimate_equilibrium, lsi_closeness, predict_critical_kappa, EquilibriumPlan, DEFAULT_C};
use sdelab::integrators::{DynamicsConfig, IntegratorKind};
use sdelab::objectives::{BatchSize, RayleighDatasetSpec};

fn main() -> sdelab::Result<()> {
    let mut spec = RayleighDatasetSpec::new(10, 200, 1);
    spec.diag_noise = 0.3;
    spec.extra_atoms = 4;
    spec.extra_scale = 0.5;
    let obj = spec.build()?;
    let x0 = vec![1.0; 10];
    let (eta, batch, lambda) = (0.1, 8.0, 0.01);
    let plan = EquilibriumPlan { burn_in: None, replicas: 4 };
    let run = |kappa: f64| {
        let mut cfg = DynamicsConfig::new(eta * kappa, (100_000.0 / kappa).ceil() as u64);
        cfg.lambda = lambda;
        cfg.batch = BatchSize::new(batch * kappa)?;
        cfg.record_every = 10;
        estimate_equilibrium(&obj, IntegratorKind::Sgd, &cfg, &x0, plan)
    };

    let base = run(1.0)?;
    let pred = predict_critical_kappa(&base, DEFAULT_C)?;
    println!("baseline NSR {:.3}; predicted κ* = {:.2} (≈ {:.2})", base.nsr().0, pred.kappa_star, pred.approximate);
    for kappa in [2.0, 4.0, 8.0] {
        let v = lsi_closeness(&base, &run(kappa)?, kappa, DEFAULT_C)?;
        println!("κ = {kappa:>2}: C_achieved = {:.3}", v.c_achieved);
    }
    Ok(())
}
