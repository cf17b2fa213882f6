use num_rational::BigRational;
use proptest::prelude::*;

use super::*;
use crate::equilibrium::{ConvexFn, EquilibriumProblem};
use crate::rates::Limits;
use crate::solver::{run, EpsSchedule, SolverConfig};

fn q(p: i64, d: i64) -> BigRational {
    BigRational::new(p.into(), d.into())
}

fn s(v: f64) -> Vector {
    Vector::scalar(v)
}

fn cf(text: &str) -> Counterfunction {
    text.parse().unwrap()
}

fn abs_problem() -> EquilibriumProblem {
    EquilibriumProblem::convex_minimization(ConvexFn::WeightedOneNorm {
        center: vec![0.0],
        weights: vec![1.0],
    })
    .unwrap()
}

/// `x_n = x0 2^-n` with `lambda = 1/2`.
fn abs_run(x0: f64, steps: usize) -> Trajectory {
    let cfg = SolverConfig::new(0.5, 0.5, 1.0, EpsSchedule::Constant { value: 0.0 }, steps);
    run(&abs_problem(), &FirmOp::Identity, &cfg, s(x0)).into_result().unwrap()
}

fn half_inputs(c_u: BigRational) -> RateInputs {
    RateInputs::with_defaults(q(1, 2), q(1, 2), q(1, 1), None, c_u, None, 1, cf("const:0")).unwrap()
}

fn half_calc(c_u: BigRational) -> RateCalculator {
    RateCalculator::new(half_inputs(c_u), Limits::default()).unwrap()
}

fn abs_ctx(traj: &Trajectory) -> OmegaContext {
    OmegaContext::from_trajectory(FirmOp::Identity, abs_problem(), traj)
}

fn by_id<'a>(reports: &'a [CheckReport], id: &str) -> &'a CheckReport {
    reports.iter().find(|r| r.id == id).unwrap()
}

#[test]
fn abs_instance_step_inequalities_hold() {
    let t = abs_run(1.0, 60);
    for (i, x) in t.xs().enumerate() {
        assert_eq!(x[0], 0.5f64.powi(i as i32));
    }
    let reports = check_step_inequalities(&t, &FirmOp::Identity, &s(0.0), &half_inputs(q(1, 1)), DEFAULT_TOL).unwrap();
    assert_eq!(reports.len(), STEP_CHECK_IDS.len());
    for r in &reports {
        assert_eq!(r.status, Status::Pass, "{r:?}");
    }
    // descent gap: Delta = 3/4 x_n^2 = alpha f^2 exactly
    assert!(by_id(&reports, "descent_gap").worst_margin.unwrap().abs() < 1e-15);
}

#[test]
fn zero_problem_constant_tail_passes() {
    let op = FirmOp::box_projection(vec![0.0], vec![1.0]).unwrap();
    let cfg = SolverConfig::new(0.5, 0.5, 1.0, EpsSchedule::Constant { value: 0.0 }, 10);
    let t = run(&EquilibriumProblem::zero(1), &op, &cfg, s(0.5)).into_result().unwrap();
    let reports = check_step_inequalities(&t, &op, &s(0.5), &half_inputs(q(0, 1)), DEFAULT_TOL).unwrap();
    for r in &reports {
        assert_eq!(r.status, Status::Pass, "{r:?}");
    }
    assert_eq!(by_id(&reports, "descent_gap").worst_margin, Some(0.0));
}

#[test]
fn injected_perturbation_fails_at_that_step() {
    let mut t = abs_run(1.0, 20);
    perturb(&mut t, 5, 10.0).unwrap();
    let reports = check_step_inequalities(&t, &FirmOp::Identity, &s(0.0), &half_inputs(q(1, 1)), DEFAULT_TOL).unwrap();
    let fejer = by_id(&reports, "fejer");
    assert_eq!(fejer.status, Status::Fail);
    assert_eq!(fejer.step, Some(5));
    assert!(perturb(&mut t, 21, 1.0).is_err());
}

#[test]
fn abs_norm_sq_witness_example() {
    let t = abs_run(1.0, 40);
    let calc = half_calc(q(1, 1));
    let bound = calc.phi1(&0u32.into(), &cf("const:2")).unwrap();
    assert_eq!(bound.value, 2u32.into());
    let series = Quantity::NormSqToU.series(&t, &FirmOp::Identity, &s(0.0)).unwrap();
    let r = witness_search("w", &series, 0, &cf("const:1"), &bound, DEFAULT_CAP);
    assert_eq!((r.status, r.step), (Status::Pass, Some(0)));
}

#[test]
fn constant_trajectory_witness_is_zero() {
    let cfg = SolverConfig::new(0.5, 0.5, 1.0, EpsSchedule::Constant { value: 0.0 }, 30);
    let t = run(&EquilibriumProblem::zero(2), &FirmOp::Identity, &cfg, Vector::new(vec![0.3, -1.0]).unwrap())
        .into_result()
        .unwrap();
    let u = Vector::new(vec![0.3, -1.0]).unwrap();
    let bound = Bound::new(10u32.into(), "test");
    for q in Quantity::ALL {
        let series = q.series(&t, &FirmOp::Identity, &u).unwrap();
        for k in [0, 3, 10] {
            for g in ["const:0", "const:4", "affine:1,2"] {
                let r = witness_search("w", &series, k, &cf(g), &bound, DEFAULT_CAP);
                assert_eq!((r.status, r.step), (Status::Pass, Some(0)), "{q} k={k} g={g}");
            }
        }
    }
}

#[test]
fn huge_bound_is_skipped_not_passed() {
    let t = abs_run(1.0, 10);
    let series = Quantity::Points.series(&t, &FirmOp::Identity, &s(0.0)).unwrap();
    let huge = Bound::new(num_traits::pow(BigUint::from(10u32), 30), "sigma");
    let r = witness_search("w", &series, 0, &cf("const:1"), &huge, DEFAULT_CAP);
    assert_eq!(r.status, Status::Skipped);
    assert_eq!(r.bound_digits, Some(31));
}

#[test]
fn short_record_is_skipped_and_exhausted_bound_fails() {
    // fvals 1, 1/2, 1/4, ...: below 1/9 from n = 4 on
    let t = abs_run(1.0, 3);
    let series = Quantity::Fvals.series(&t, &FirmOp::Identity, &s(0.0)).unwrap();
    let r = witness_search("w", &series, 8, &cf("const:0"), &Bound::new(100u32.into(), "b"), DEFAULT_CAP);
    assert_eq!(r.status, Status::Skipped);
    let r = witness_search("w", &series, 8, &cf("const:0"), &Bound::new(2u32.into(), "b"), DEFAULT_CAP);
    assert_eq!(r.status, Status::Fail);
    let t = abs_run(1.0, 10);
    let series = Quantity::Fvals.series(&t, &FirmOp::Identity, &s(0.0)).unwrap();
    let r = witness_search("w", &series, 8, &cf("const:2"), &Bound::new(100u32.into(), "b"), DEFAULT_CAP);
    assert_eq!((r.status, r.step), (Status::Pass, Some(4)));
}

#[test]
fn approx_point_examples() {
    let t = abs_run(1.0, 30);
    let ctx = abs_ctx(&t);
    let calc = half_calc(q(1, 1));
    let cap = 100_000_000;
    let r = check_approx_point_bound(&t, &ctx, 2, &calc, cap).unwrap();
    assert_eq!((r.status, r.step), (Status::Pass, Some(2)));
    let r = check_approx_zero_bound(&t, &ctx, 2, &calc, cap).unwrap();
    assert_eq!((r.status, r.step), (Status::Pass, Some(2)));
    // the record is far shorter than the bound and never reaches 1/(k+1)
    let short = abs_run(1000.0, 8);
    let r = check_approx_point_bound(&short, &abs_ctx(&short), 5, &calc, cap).unwrap();
    assert_eq!(r.status, Status::Skipped);
    assert!(r.note.starts_with("no witness in the 9 recorded steps"), "{}", r.note);
    let r = check_approx_point_bound(&t, &ctx, 2, &calc, DEFAULT_CAP).unwrap();
    assert_eq!(r.status, Status::Skipped);

    let op = FirmOp::box_projection(vec![0.0], vec![1.0]).unwrap();
    let cfg = SolverConfig::new(0.5, 0.5, 1.0, EpsSchedule::Constant { value: 0.0 }, 5);
    let z = run(&EquilibriumProblem::zero(1), &op, &cfg, s(0.5)).into_result().unwrap();
    let zctx = OmegaContext::from_trajectory(op, EquilibriumProblem::zero(1), &z);
    let r = check_approx_point_bound(&z, &zctx, 3, &half_calc(q(0, 1)), DEFAULT_CAP).unwrap();
    assert_eq!((r.status, r.step), (Status::Pass, Some(0)));
}

#[test]
fn fejer_modulus_examples() {
    let t = abs_run(1.0, 60);
    let ctx = abs_ctx(&t);
    let calc = half_calc(q(1, 1));
    let k = to_index(&calc.chi(&0u32.into(), &2u32.into(), &0u32.into()).unwrap()).unwrap();
    assert!(k <= 60);
    let outside = vec![s(1.5), s(-0.9)];
    let r = check_fejer_modulus(&t, &ctx, &calc, (0, 2, 0), &outside, DEFAULT_TOL).unwrap();
    assert_eq!(r.status, Status::Pass);
    assert!(r.note.contains("no members sampled"));

    let edge = threshold(k);
    let cands = vec![s(0.0), s(edge), s(-edge), s(edge / 2.0), s(edge * 1.01)];
    let r = check_fejer_modulus(&t, &ctx, &calc, (0, 2, 0), &cands, DEFAULT_TOL).unwrap();
    assert_eq!(r.status, Status::Pass, "{r:?}");
    assert!(r.note.starts_with("4 of 5"));

    let grid = candidate_points(&s(0.0), 2.0, 101, 200, 7);
    for (n, m, r) in [(0, 2, 0), (3, 4, 1), (5, 1, 3)] {
        let rep = check_fejer_modulus(&t, &ctx, &calc, (n, m, r), &grid, DEFAULT_TOL);
        match rep {
            Ok(rep) => assert_eq!(rep.status, Status::Pass, "{rep:?}"),
            Err(VerifyError::Regularity(RegularityError::HorizonExceeded { .. })) => {}
            Err(e) => panic!("{e}"),
        }
    }
    let tiny = abs_ctx(&abs_run(1.0, 1));
    assert!(matches!(
        check_fejer_modulus(&t, &tiny, &calc, (0, 2, 0), &cands, DEFAULT_TOL),
        Err(VerifyError::Regularity(RegularityError::HorizonExceeded { .. }))
    ));
}

#[test]
fn regularity_rate_examples() {
    // x0 = 2^-10 keeps every rate for k <= 20 under 10^4
    let t = abs_run(2f64.powi(-10), 10_000);
    let calc = half_calc(q(1, 1 << 20));
    let psi = RegularityModulus::new(Counterfunction::identity());
    let r = check_regularity_rate(&t, &s(0.0), 20, &psi, &calc, DEFAULT_CAP);
    assert_eq!(r.status, Status::Pass, "{r:?}");
    assert!(r.note.starts_with("21 values"), "{}", r.note);

    // rates above a short horizon are skipped
    let short = abs_run(1.0, 100);
    let r = check_regularity_rate(&short, &s(0.0), 20, &psi, &half_calc(q(1, 1)), DEFAULT_CAP);
    assert_eq!(r.status, Status::Skipped);

    // constant trajectory at the limit
    let cfg = SolverConfig::new(0.5, 0.5, 1.0, EpsSchedule::Constant { value: 0.0 }, 50);
    let z = run(&EquilibriumProblem::zero(1), &FirmOp::Identity, &cfg, s(0.25)).into_result().unwrap();
    let r = check_regularity_rate(&z, &s(0.25), 5, &psi, &half_calc(q(0, 1)), DEFAULT_CAP);
    assert_eq!(r.status, Status::Pass, "{r:?}");
}

#[test]
fn uniform_closedness_examples() {
    let t = abs_run(1.0, 10);
    let ctx = abs_ctx(&t);
    let sigma = SigmaFamily::Uniform(Counterfunction::identity());
    let pairs = vec![(s(0.325), s(0.2)), (s(0.1), s(0.1))];
    let r = check_uniform_closedness(&ctx, 1, &sigma, &pairs).unwrap();
    assert_eq!(r.status, Status::Pass);
    assert!(r.note.starts_with("2 pairs"), "{}", r.note);
    // distance premise violated: excluded
    let r = check_uniform_closedness(&ctx, 1, &sigma, &[(s(0.9), s(0.2))]).unwrap();
    assert_eq!(r.status, Status::Pass);
    assert_eq!(r.note, "no pairs satisfied the premises");
    assert!(matches!(
        check_uniform_closedness(&ctx, 5, &sigma, &pairs),
        Err(VerifyError::Regularity(RegularityError::HorizonExceeded { .. }))
    ));
}

#[test]
fn characterization_on_grid() {
    let t = abs_run(1.0, 25);
    let ctx = abs_ctx(&t);
    let pts = candidate_points(&s(0.0), 2.0, 1000, 0, 0);
    assert_eq!(pts.len(), 1000);
    for r in check_characterization(&ctx, &pts, 20).unwrap() {
        assert_eq!(r.status, Status::Pass, "{r:?}");
    }
}

#[test]
fn suite_runs_every_group() {
    let t = abs_run(1.0, 200);
    let ctx = abs_ctx(&t);
    let calc = half_calc(q(1, 1));
    let suite = Suite {
        traj: &t,
        ctx: &ctx,
        calc: &calc,
        u: s(0.0),
        ks: vec![0, 1, 2],
        gs: vec![cf("const:1")],
        psi: Some(RegularityModulus::new(Counterfunction::identity())),
        x_star: Some(s(0.0)),
        sigma: Some(SigmaFamily::Uniform(Counterfunction::identity())),
        cap: DEFAULT_CAP,
        tol: DEFAULT_TOL,
        seed: 1,
        samples: 200,
    };
    let reports = suite.run(&CheckGroup::ALL).unwrap();
    let (pass, fail, _) = tally(&reports);
    assert_eq!(fail, 0, "{reports:#?}");
    assert!(pass >= STEP_CHECK_IDS.len());
    assert_eq!(reports, suite.run(&CheckGroup::ALL).unwrap());
    assert_eq!("fejer_modulus".parse::<CheckGroup>().unwrap(), CheckGroup::FejerModulus);
    assert!("bogus".parse::<CheckGroup>().is_err());
}

fn arb_series() -> impl Strategy<Value = (Series, u64)> {
    let scalars = prop::collection::vec(0.0f64..1.5, 1..60);
    prop_oneof![
        (scalars.clone(), 0u64..4).prop_map(|(v, k)| (Series::Below(v), k)),
        (scalars, 0u64..4).prop_map(|(v, k)| (Series::Oscillation(v), k)),
        (prop::collection::vec((-1.0f64..1.0, -1.0f64..1.0), 1..40), 0u64..4).prop_map(|(v, k)| {
            let pts = v.into_iter().map(|(a, b)| Vector::new(vec![a, b]).unwrap()).collect();
            (Series::Points(pts), k)
        }),
    ]
}

fn arb_g() -> impl Strategy<Value = Counterfunction> {
    (0u32..3, 0u32..6).prop_map(|(a, b)| Counterfunction::affine(a, b))
}

proptest! {
    #[test]
    fn witness_matches_linear_scan((series, k) in arb_series(), g in arb_g(), limit in 0usize..70) {
        let thr = threshold(k as usize);
        prop_assert_eq!(find_witness(&series, thr, &g, limit), find_witness_naive(&series, thr, &g, limit));
    }

    #[test]
    fn skipped_reports_never_pass(bound in 0u64..100, cap in 0u64..100, (series, k) in arb_series(), g in arb_g()) {
        let r = witness_search("w", &series, k, &g, &Bound::new(bound.into(), "b"), cap);
        prop_assert!(!(r.status == Status::Pass && bound > cap));
        if r.status == Status::Pass {
            prop_assert!(r.step.unwrap() as u64 <= bound);
        }
    }
}
