//! Equilibrium norm identities for SGD, noisy GD and the second-order SDE on
//! a scale-invariant Rayleigh-quotient objective with weight decay.

use sdelab::equilibrium::{check_norm_identity, estimate_equilibrium, EquilibriumPlan, NormIdentity};
use sdelab::integrators::{DynamicsConfig, IntegratorKind};
use sdelab::objectives::RayleighDatasetSpec;

fn main() -> sdelab::Result<()> {
    let mut spec = RayleighDatasetSpec::new(10, 200, 1);
    spec.spectrum = [0.0, 1.0];
    spec.diag_noise = 0.3;
    spec.extra_atoms = 4;
    spec.extra_scale = 0.5;
    let obj = spec.build()?;
    let x0 = vec![1.0; 10];

    let mut cfg = DynamicsConfig::new(0.1, 40_000);
    cfg.lambda = 0.01;
    cfg.record_every = 10;
    cfg.substep = Some(cfg.eta / 20.0);
    let plan = EquilibriumPlan { burn_in: None, replicas: 4 };
    for kind in [IntegratorKind::Sgd, IntegratorKind::Ngd, IntegratorKind::Sde2] {
        let st = estimate_equilibrium(&obj, kind, &cfg, &x0, plan)?;
        let id = check_norm_identity(&st, NormIdentity::for_kind(kind));
        println!(
            "{kind:>4}: R = {:.4}  G = {:.3e}  N = {:.3e}  residual {:+.2}% ± {:.2}%",
            st.r,
            st.g,
            st.n,
            100.0 * id.relative_residual,
            100.0 * id.residual_se
        );
    }
    Ok(())
}
