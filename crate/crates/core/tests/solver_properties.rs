use moreau_core::bounds::BoundCertificate;
use moreau_core::filippov::{iterate, selection_residual};
use moreau_core::stepper::{deviation_check, inclusion_residual_check, solve_from};
use moreau_core::{
    solve_fixed_selection, solve_unperturbed, DriftConfig, GridFunction, GridKind, KernelConfig, PerturbationConfig,
    PerturbationShape, Problem, ProblemConfig, SetConfig, SetShape, Signal, TimeGrid, VolterraRule,
};
use proptest::prelude::*;
use std::sync::Arc;

fn config(set: SetConfig, x0: Vec<f64>, interval: [f64; 2]) -> ProblemConfig {
    let dim = x0.len();
    ProblemConfig {
        interval,
        x0,
        q0: None,
        r0: None,
        set,
        drift: DriftConfig::Zero,
        kernel: KernelConfig::Zero,
        perturbation: PerturbationConfig::zero(dim),
        quadrature: VolterraRule::LeftRectangle,
    }
}

fn grid(t1: f64, h: f64) -> Arc<TimeGrid> {
    Arc::new(TimeGrid::uniform(0.0, t1, h).unwrap())
}

#[test]
fn linear_drift_gives_exponential_decay() {
    // -x' = f1(x) = x
    let mut cfg = config(SetConfig::new(SetShape::Free { dim: 1 }), vec![1.0], [0.0, 1.0]);
    cfg.drift = DriftConfig::Linear {
        matrix: vec![vec![1.0]],
        forcing: None,
        signal: None,
    };
    let p = Problem::from_config(&cfg).unwrap();
    let q = solve_unperturbed(&p, &grid(1.0, 1e-3)).unwrap();
    let err = q
        .states()
        .iter()
        .zip(q.grid().nodes())
        .map(|(x, t)| (x[0] - (-t).exp()).abs())
        .fold(0.0, f64::max);
    assert!(err <= 5e-3);
    assert!((q.final_state()[0] - 0.367_879_441_171_442_3).abs() <= 5e-3);
}

#[test]
fn trapezoid_memory_is_more_accurate() {
    let mut cfg = config(SetConfig::new(SetShape::Free { dim: 1 }), vec![1.0], [0.0, 1.0]);
    cfg.kernel = KernelConfig::Memory { scale: 1.0 };
    let left = Problem::from_config(&cfg).unwrap();
    let trap = left.clone().with_quadrature(VolterraRule::Trapezoid);
    let g = grid(1.0, 1e-2);
    let cos1 = 1f64.cos();
    let e_left = (solve_unperturbed(&left, &g).unwrap().final_state()[0] - cos1).abs();
    let e_trap = (solve_unperturbed(&trap, &g).unwrap().final_state()[0] - cos1).abs();
    assert!(e_left <= 5e-2 && e_trap <= 5e-2);
    assert!(
        (solve_unperturbed(&left, &grid(1.0, 1e-3)).unwrap().final_state()[0] - 0.540_302_305_868_139_8).abs() <= 5e-3
    );
}

#[test]
fn initial_offset_is_preserved_in_a_static_convex_set() {
    let set = SetConfig::new(SetShape::Ball {
        center: vec![0.0, 0.0],
        radius: 2.0,
    });
    let p = Problem::from_config(&config(set, vec![0.5, 0.0], [0.0, 1.0])).unwrap();
    let g = grid(1.0, 1e-2);
    let z = GridFunction::zeros(g.clone(), 2, GridKind::Selection);
    let a = solve_from(&p, &[0.5, 0.0], &z, &g).unwrap();
    let b = solve_from(&p, &[-0.3, 0.4], &z, &g).unwrap();
    let cert = BoundCertificate::for_problem(&p, &g).unwrap();
    assert!(cert.phi_const >= 1.0);
    let rep = deviation_check(&a, &b, &cert).unwrap();
    assert_eq!(rep.violations, 0);
    // the distance never changes, so the ratio is 1 / Phi at every node
    assert!((rep.max_ratio - 1.0 / cert.phi_const).abs() <= 1e-12);
    let same = deviation_check(&a, &a, &cert).unwrap();
    assert_eq!(same.max_ratio, 0.0);
}

#[test]
fn filippov_examples() {
    let free = SetConfig::new(SetShape::Free { dim: 1 });
    let mut cfg = config(free.clone(), vec![0.0], [0.0, 1.0]);
    cfg.perturbation = PerturbationConfig::new(PerturbationShape::FiniteSet {
        points: vec![vec![1.0], vec![-1.0]],
    });
    let p = Problem::from_config(&cfg).unwrap();
    let g = grid(1.0, 1e-3);
    let out = iterate(&p, &g, 1e-6, 10).unwrap();
    assert_eq!(out.report.converged_at, Some(1));
    assert!(out.z.values.iter().all(|z| z == &vec![-1.0]));
    assert_eq!(selection_residual(&p, &out.z, &out.trajectory).unwrap(), 0.0);

    cfg.perturbation = PerturbationConfig::new(PerturbationShape::Ball {
        center: vec![0.0],
        radius: 0.3,
    });
    let p = Problem::from_config(&cfg).unwrap();
    let out = iterate(&p, &g, 1e-6, 10).unwrap();
    assert_eq!(out.report.converged_at, Some(0));
}

#[test]
fn lipschitz_iteration_is_cauchy() {
    let mut cfg = config(SetConfig::new(SetShape::Free { dim: 1 }), vec![0.0], [0.0, 1.0]);
    cfg.perturbation = PerturbationConfig::new(PerturbationShape::LipschitzTwoPoint {
        base: 1.0,
        amplitude: 0.5,
    });
    let p = Problem::from_config(&cfg).unwrap();
    let g = grid(1.0, 1e-3);
    let cert = BoundCertificate::for_problem(&p, &g).unwrap();
    let out = moreau_core::filippov::iterate_with_certificate(&p, &g, &cert, 1e-9, 40).unwrap();
    let recs = &out.report.records;
    let c_t = cert.c.last();
    for w in recs.windows(2) {
        if (w[0].i as f64) >= c_t {
            assert!(w[1].sup_z_delta <= w[0].sup_z_delta + 1e-12, "{w:?}");
        }
    }
    for r in recs {
        assert!(r.sup_y_delta <= 1.1 * r.factorial_bound + cert.slack);
    }
}

fn set_strategy() -> impl Strategy<Value = (SetConfig, Vec<f64>)> {
    prop_oneof![
        (0.1..2.0f64, -1.0..1.0f64).prop_map(|(w, v)| (
            SetConfig::new(SetShape::Box {
                lower: vec![-w, -w],
                upper: vec![w, w]
            })
            .moving(vec![1.0, 0.5], Signal::Linear { value: 0.0, slope: v }),
            vec![0.0, 0.0]
        )),
        (0.5..2.0f64, 0.1..3.0f64).prop_map(|(r, om)| (
            SetConfig::new(SetShape::Ball {
                center: vec![0.0, 0.0],
                radius: r
            })
            .moving(
                vec![0.0, 1.0],
                Signal::Sine {
                    amplitude: 0.5,
                    omega: om,
                    phase: 0.0,
                    offset: 0.0
                }
            ),
            vec![0.0, 0.0]
        )),
        (0.5..1.5f64).prop_map(|r| (
            SetConfig::new(SetShape::BallComplement {
                center: vec![0.0, 0.0],
                radius: r
            }),
            vec![-r - 0.05, 0.1]
        )),
        (0.5..1.0f64).prop_map(|r| (
            SetConfig::new(SetShape::Annulus {
                center: vec![0.0, 0.0],
                inner: r,
                outer: r + 1.0
            }),
            vec![r + 0.5, 0.0]
        )),
    ]
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn every_node_is_feasible_and_a_normal_step(
        (set, x0) in set_strategy(),
        wind in prop::collection::vec(-1.5..1.5f64, 2),
        z in prop::collection::vec(-0.5..0.5f64, 2),
    ) {
        let mut cfg = config(set, x0, [0.0, 1.0]);
        cfg.drift = DriftConfig::Constant { value: wind };
        let p = Problem::from_config(&cfg).unwrap();
        let g = grid(1.0, 5e-3);
        let zf = GridFunction::constant(g.clone(), &z, GridKind::Selection);
        let traj = solve_fixed_selection(&p, &zf, &g).unwrap();
        prop_assert!(traj.max_residual() <= 1e-9);
        let rep = inclusion_residual_check(&p, &traj).unwrap();
        prop_assert_eq!(rep.failures, 0);
        let again = solve_fixed_selection(&p, &zf, &g).unwrap();
        prop_assert_eq!(traj, again);
    }
}
