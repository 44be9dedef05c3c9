use proptest::prelude::*;
use sdelab::equilibrium::{c_closeness, lsi_failure_certificate, sde_failure_certificate, CertificateStatus, EquilibriumStats};
use sdelab::integrators::{run_trajectory, step_sgd, DynamicsConfig, IntegratorKind};
use sdelab::linalg::Matrix;
use sdelab::moments::theoretical_svag_moments;
use sdelab::objectives::{
    BatchSampler, BatchSize, QuadraticGaussianObjective, RayleighDatasetSpec, RayleighQuotientObjective, SamplingMode,
    StochasticObjective,
};
use sdelab::rng::StreamKey;
use std::sync::OnceLock;

fn rayleigh() -> &'static RayleighQuotientObjective {
    static OBJ: OnceLock<RayleighQuotientObjective> = OnceLock::new();
    OBJ.get_or_init(|| {
        let mut spec = RayleighDatasetSpec::new(6, 40, 11);
        spec.extra_atoms = 3;
        spec.build().unwrap()
    })
}

fn quadratic() -> QuadraticGaussianObjective {
    let a = Matrix::from_rows(&[vec![2.0, 0.3, 0.0], vec![0.3, 1.0, 0.1], vec![0.0, 0.1, 0.5]]).unwrap();
    let s = Matrix::from_rows(&[vec![1.0, 0.2, 0.0], vec![0.2, 2.0, 0.0], vec![0.0, 0.0, 4.0]]).unwrap();
    QuadraticGaussianObjective::new(a, vec![0.5, -1.0, 0.0], s).unwrap()
}

fn norm(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn nonzero_point(dim: usize) -> impl Strategy<Value = Vec<f64>> {
    proptest::collection::vec(-3.0f64..3.0, dim).prop_filter("away from origin", |x| norm(x) > 1e-3)
}

fn stats(kind: IntegratorKind, eta: f64, r: f64, g: f64, n: f64) -> EquilibriumStats {
    EquilibriumStats::from_values(kind, eta, 0.01, 1.0, r, g, n)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn rayleigh_loss_and_gradient_are_scale_invariant(x in nonzero_point(6), c in 0.01f64..100.0) {
        let obj = rayleigh();
        let cx: Vec<f64> = x.iter().map(|v| c * v).collect();
        let (l, lc) = (obj.loss(&x).unwrap(), obj.loss(&cx).unwrap());
        prop_assert!((l - lc).abs() <= 1e-12 * (1.0 + l.abs()));
        let g = obj.expected_gradient(&x).unwrap();
        let gc = obj.expected_gradient(&cx).unwrap();
        let diff: Vec<f64> = g.iter().zip(&gc).map(|(a, b)| c * b - a).collect();
        prop_assert!(norm(&diff) <= 1e-10 * norm(&g).max(1e-300));
        prop_assert!(dot(&x, &g).abs() <= 1e-10 * norm(&x) * norm(&g).max(1e-300));
    }

    #[test]
    fn rayleigh_noise_annihilates_x(x in nonzero_point(6), b in 1usize..8) {
        let obj = rayleigh();
        let sigma = obj.noise_covariance(&x, BatchSize::new(b as f64).unwrap()).unwrap();
        let q = dot(&x, &sigma.matvec(&x));
        prop_assert!(q.abs() <= 1e-12 * dot(&x, &x) * sigma.trace().max(1e-300));
    }

    #[test]
    fn covariance_scales_inversely_with_batch(x in nonzero_point(6), b in 1usize..8, kappa in 1usize..10) {
        let (b, kappa) = (b as f64, kappa as f64);
        for obj in [rayleigh() as &dyn StochasticObjective, &quadratic() as &dyn StochasticObjective] {
            let x = &x[..obj.dim()];
            let s1 = obj.noise_covariance(x, BatchSize::new(b).unwrap()).unwrap();
            let sk = obj.noise_covariance(x, BatchSize::new(kappa * b).unwrap()).unwrap();
            prop_assert!(s1.max_abs_diff(&sk.scaled(kappa)) <= 1e-12 * s1.max_abs().max(1e-300));
        }
    }

    #[test]
    fn sgd_norm_recursion_is_exact(x in nonzero_point(6), b in 1usize..6, eta in 0.01f64..5.0, seed in any::<u64>()) {
        // Scale invariance makes the cross term vanish:
        // |x'|² = (1 − ηλ)²|x|² + η²|∇L_γ(x)|².
        let obj = rayleigh();
        let mut cfg = DynamicsConfig::new(eta, 1);
        cfg.lambda = 0.01;
        cfg.batch = BatchSize::new(b as f64).unwrap();
        let key = StreamKey::new(seed, "norm");
        let next = step_sgd(obj, &x, &cfg, &mut BatchSampler::new(SamplingMode::WithReplacement), &mut key.stream(0)).unwrap();
        let g = obj
            .sample_gradient(&x, cfg.batch, &mut BatchSampler::new(SamplingMode::WithReplacement), &mut key.stream(0))
            .unwrap()
            .gradient;
        let lhs = dot(&next, &next);
        let rhs = (1.0 - eta * cfg.lambda).powi(2) * dot(&x, &x) + eta * eta * dot(&g, &g);
        prop_assert!((lhs - rhs).abs() <= 1e-12 * rhs, "{lhs} vs {rhs}");
    }

    #[test]
    fn svag_moments_at_a_critical_point(l in 1u32..64, eta in 0.01f64..1.0) {
        // ∇L = 0 at the minimiser: mean 0 and second moment (η²/l)Σ exactly.
        let obj = quadratic();
        let x = obj.stationary_mean().unwrap();
        let mut cfg = DynamicsConfig::new(eta, 1);
        cfg.svag_l = l;
        let m = theoretical_svag_moments(&obj, &x, &cfg).unwrap();
        prop_assert!(m.mean.iter().all(|v| v.abs() < 1e-12));
        let want = obj.s().scaled(eta * eta / l as f64);
        prop_assert!(m.second.max_abs_diff(&want) < 1e-12);
    }

    #[test]
    fn closeness_is_symmetric(r in 0.1f64..10.0, g in 0.1f64..10.0, n in 0.1f64..10.0,
                              r2 in 0.1f64..10.0, g2 in 0.1f64..10.0, n2 in 0.1f64..10.0) {
        let a = stats(IntegratorKind::Sgd, 0.1, r, g, n);
        let b = stats(IntegratorKind::Ngd, 0.1, r2, g2, n2);
        let ab = c_closeness(&a, &b, 2f64.sqrt()).unwrap();
        let ba = c_closeness(&b, &a, 2f64.sqrt()).unwrap();
        prop_assert_eq!(ab.c_achieved, ba.c_achieved);
        prop_assert!(ab.c_achieved >= 1.0);
    }

    #[test]
    fn certificates_are_monotone(nsr in 0.01f64..5.0, eta1 in 0.01f64..10.0, factor in 1.0f64..10.0, c in 1.05f64..2.0) {
        let sde = stats(IntegratorKind::Ngd, 0.1, 1.0, 1.0, nsr);
        let sgd = stats(IntegratorKind::Sgd, 0.1, 1.0, 1.0, nsr);
        let at = |eta: f64| sde_failure_certificate(Some(&sde), Some(&sgd), eta, c).unwrap().status;
        if at(eta1) == CertificateStatus::FailCertified {
            prop_assert_eq!(at(eta1 * factor), CertificateStatus::FailCertified);
        }
        let k1 = c * c * 1.01 + eta1;
        let lsi = |k: f64| lsi_failure_certificate(&sgd, c, k).unwrap().status;
        if lsi(k1) == CertificateStatus::FailCertified {
            prop_assert_eq!(lsi(k1 * factor), CertificateStatus::FailCertified);
        }
    }
}

#[test]
fn trajectories_are_pure_and_svag_one_is_sgd() {
    let obj = rayleigh();
    let mut cfg = DynamicsConfig::new(0.3, 200);
    cfg.lambda = 0.01;
    cfg.batch = BatchSize::new(3.0).unwrap();
    cfg.seed = 5;
    let x0 = vec![1.0; 6];
    let a = run_trajectory(obj, IntegratorKind::Sgd, &cfg, &x0).unwrap();
    let b = run_trajectory(obj, IntegratorKind::Sgd, &cfg, &x0).unwrap();
    assert_eq!(a.to_csv(), b.to_csv());
    let s = run_trajectory(obj, IntegratorKind::Svag, &cfg, &x0).unwrap();
    assert_eq!(a.final_x, s.final_x);
}
