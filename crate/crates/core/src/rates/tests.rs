use super::*;

fn q(p: i64, d: i64) -> BigRational {
    BigRational::new(p.into(), d.into())
}

fn n(v: u64) -> BigUint {
    BigUint::from(v)
}

fn cf(s: &str) -> Counterfunction {
    s.parse().unwrap()
}

#[allow(clippy::too_many_arguments)]
fn calc(a: (i64, i64), b: (i64, i64), m: (i64, i64), l: (i64, i64), c_u: (i64, i64), e: (i64, i64), dim: u32, tau: &str) -> RateCalculator {
    let inputs = RateInputs::new(
        q(a.0, a.1),
        q(b.0, b.1),
        q(m.0, m.1),
        q(l.0, l.1),
        q(c_u.0, c_u.1),
        q(e.0, e.1),
        dim,
        cf(tau),
    )
    .unwrap();
    RateCalculator::new(inputs, Limits::default()).unwrap()
}

fn unit(l: (i64, i64), c_u: (i64, i64), e: (i64, i64), tau: &str) -> RateCalculator {
    calc((1, 1), (1, 1), (1, 1), l, c_u, e, 1, tau)
}

#[test]
fn parse_rationals() {
    assert_eq!(parse_rational("3/4").unwrap(), q(3, 4));
    assert_eq!(parse_rational(" 6/8 ").unwrap(), q(3, 4));
    assert_eq!(parse_rational("2").unwrap(), q(2, 1));
    assert_eq!(parse_rational("0.125").unwrap(), q(1, 8));
    assert!(matches!(parse_rational("1/0"), Err(RateError::Parse { .. })));
    assert!(parse_rational("abc").is_err());
    assert!(parse_rational("1.").is_err());
}

#[test]
fn constants_examples() {
    let c = unit((2, 1), (1, 1), (0, 1), "const:0");
    assert_eq!(c.constants().alpha, q(1, 1));
    assert!(c.constants().beta.best().is_exact());
    assert_eq!(c.constants().beta.best().hi(), &q(1, 1));
    assert_eq!(c.constants().sigma, n(5));
    // beta = (1 + sqrt(4))^2 = 9 for b = e = M = 1
    let c = unit((2, 1), (1, 1), (1, 1), "const:0");
    assert_eq!(c.constants().beta.best().hi(), &q(9, 1));
}

#[test]
fn step_range_is_checked() {
    let bad = RateInputs::new(q(1, 1), q(2, 1), q(1, 1), q(1, 1), q(1, 1), q(0, 1), 1, cf("const:0"));
    match bad {
        Err(RateError::InvalidRange(msg)) => assert_eq!(msg, "lambda range not inside (0, 2/M^2)"),
        other => panic!("{other:?}"),
    }
    assert!(RateInputs::new(q(1, 1), q(1, 2), q(1, 1), q(1, 1), q(1, 1), q(0, 1), 1, cf("const:0")).is_err());
}

#[test]
fn phi1_prime_examples() {
    let lim = Limits::default();
    assert_eq!(phi1_prime(&n(9), &cf("const:5"), &q(0, 1), &n(7), &lim).unwrap().value, n(7));
    assert_eq!(phi1_prime(&n(0), &cf("const:2"), &q(1, 1), &n(3), &lim).unwrap().value, n(5));
    // g(n) = n: three doublings from 1
    assert_eq!(phi1_prime(&n(1), &cf("affine:1,0"), &q(3, 2), &n(1), &lim).unwrap().value, n(8));
}

#[test]
fn phi1_prime_matches_direct_iteration() {
    let lim = Limits::default();
    for g in ["const:0", "const:3", "affine:1,0", "affine:2,1", "affine:3,7"] {
        let g = cf(g);
        for (p, d) in [(0, 1), (1, 3), (5, 2), (7, 1)] {
            for k in 0..6u64 {
                for start in 0..4u64 {
                    let iters = ((p * (k as i64 + 1)) as f64 / d as f64).ceil() as u64;
                    let mut v = n(start);
                    for _ in 0..iters {
                        v = &v + g.eval(&v);
                    }
                    let got = phi1_prime(&n(k), &g, &q(p, d), &n(start), &lim).unwrap().value;
                    assert_eq!(got, v, "g={g} c_u={p}/{d} k={k} K={start}");
                }
            }
        }
    }
}

#[test]
fn phi1_prime_respects_budget() {
    let lim = Limits {
        digit_budget: 100,
        ..Limits::default()
    };
    let err = phi1_prime(&n(10_000), &cf("affine:1,0"), &q(1, 1), &n(1), &lim).unwrap_err();
    assert!(matches!(err, RateError::SizeOverflow { budget: 100, .. }));
}

#[test]
fn phi2_examples() {
    let c = unit((1, 1), (1, 1), (0, 1), "const:0");
    assert_eq!(c.phi2(&n(0), &cf("const:1")).unwrap().value, n(2));
    let c0 = unit((1, 1), (0, 1), (0, 1), "const:0");
    assert_eq!(c0.phi2(&n(5), &cf("affine:3,1")).unwrap().value, n(0));
    // alpha = a (2 - M^2 b) = 1/4 with a = 1/4, b = 1, M = 1
    let c = calc((1, 4), (1, 1), (1, 1), (1, 1), (1, 1), (0, 1), 1, "const:0");
    assert_eq!(c.constants().alpha, q(1, 4));
    assert_eq!(c.phi2(&n(0), &cf("const:1")).unwrap().value, n(8));
}

#[test]
fn phi3_examples() {
    let c = unit((1, 2), (0, 1), (0, 1), "const:0");
    assert_eq!(c.phi3(&n(3), &cf("const:4")).unwrap().value, n(1));
    let c = unit((1, 2), (1, 1), (0, 1), "const:0");
    assert!(c.constants().eta.best().is_exact());
    assert_eq!(c.constants().eta.best().hi(), &q(3, 1));
    assert_eq!(c.phi3(&n(0), &cf("const:1")).unwrap().value, n(163));
    assert_eq!(c.phi3(&n(0), &cf("const:0")).unwrap().value, n(82));
}

#[test]
fn approx_point_bound_examples() {
    let c = unit((2, 1), (1, 1), (0, 1), "const:0");
    assert_eq!(c.approx_point_bound(&n(0)).unwrap().value, n(20001));
    let c0 = unit((2, 1), (0, 1), (0, 1), "const:0");
    assert_eq!(c0.approx_point_bound(&n(0)).unwrap().value, n(1));
    let c = unit((2, 1), (1, 1), (0, 1), "affine:1,5");
    assert_eq!(c.approx_point_bound(&n(0)).unwrap().value, n(20007));
}

#[test]
fn approx_point_bound_is_phi1_prime_form() {
    // Phi(k) = phi1_prime(sigma^4 16 (k+1)^4 - 1, const 2, c_u, max(k, tau(2k+1))) + 1
    let c = calc((1, 2), (1, 2), (1, 1), (1, 4), (3, 7), (1, 1), 1, "affine:2,1");
    let lim = Limits::default();
    let s4 = c.constants().sigma.pow(4) * 16u32;
    for k in 0..30u64 {
        let idx = &s4 * n(k + 1).pow(4) - 1u32;
        let start = n(k).max(c.inputs().tau.eval_u64(2 * k + 1));
        let via = phi1_prime(&idx, &cf("const:2"), &c.inputs().c_u, &start, &lim).unwrap().value + 1u32;
        assert_eq!(c.approx_point_bound(&n(k)).unwrap().value, via);
    }
}

#[test]
fn chi_examples() {
    let c = unit((1, 1), (1, 1), (0, 1), "const:0");
    assert_eq!(c.chi(&n(7), &n(0), &n(4)).unwrap().value, n(7));
    assert_eq!(c.chi(&n(3), &n(2), &n(1)).unwrap().value, n(16));
    let c = unit((1, 1), (1, 1), (1, 1), "const:0");
    assert_eq!(c.chi(&n(0), &n(1), &n(0)).unwrap().value, n(9));
}

#[test]
fn chi_g_max_equals_scan() {
    let c = calc((1, 3), (1, 2), (3, 2), (1, 1), (1, 1), (2, 5), 1, "const:0");
    for g in ["const:0", "const:3", "affine:2,1"] {
        let g = cf(g);
        for k in [0u64, 3, 11] {
            for m in [0u64, 1, 17, 250] {
                assert_eq!(
                    c.chi_g_max(&n(m), &n(k), &g).unwrap().value,
                    c.chi_g_max_scan(m, &n(k), &g).unwrap().value
                );
            }
        }
    }
}

#[test]
fn total_bdd_modulus_examples() {
    assert_eq!(unit((1, 1), (1, 1), (0, 1), "const:0").total_bdd_modulus(&n(0)).unwrap().value, n(8));
    assert_eq!(unit((1, 100), (1, 1), (0, 1), "const:0").total_bdd_modulus(&n(0)).unwrap().value, n(1));
    let c = calc((1, 1), (1, 1), (1, 1), (1, 2), (1, 1), (0, 1), 2, "const:0");
    assert_eq!(c.total_bdd_modulus(&n(0)).unwrap().value, n(36));
}

#[test]
fn metastability_rate_examples() {
    let c = unit((1, 100), (0, 1), (0, 1), "const:0");
    assert_eq!(c.metastability_rate(&n(0), &cf("const:0")).unwrap().value, n(1));
    // trivial constants: eight levels of Phi(n) = 20000 (n+1)^4 + n + 1 from 0
    let c = unit((1, 1), (1, 1), (0, 1), "const:0");
    let mut v = n(0);
    for _ in 0..8 {
        v = n(20000) * (&v + 1u32).pow(4) + &v + 1u32;
    }
    let got = c.metastability_rate(&n(0), &cf("const:0")).unwrap();
    assert_eq!(got.value, v);
    assert!(got.digits() > 90_000);
}

#[test]
fn metastability_rate_respects_limits() {
    let c = unit((1, 1), (1, 1), (1, 1), "const:0");
    let err = c.metastability_rate(&n(3), &cf("affine:1,1")).unwrap_err();
    assert!(matches!(err, RateError::SizeOverflow { .. }));
    let inputs = unit((1, 1), (0, 1), (0, 1), "const:0").inputs().clone();
    let c = RateCalculator::new(
        inputs,
        Limits {
            iteration_limit: 5,
            ..Limits::default()
        },
    )
    .unwrap();
    assert!(matches!(
        c.metastability_rate(&n(0), &cf("const:0")),
        Err(RateError::IterationLimit { limit: 5, .. })
    ));
}

#[test]
fn uniform_closedness_examples() {
    let id = SigmaFamily::Uniform(cf("affine:1,0"));
    let (d, o) = uniform_closedness_moduli(&n(0), &id).unwrap();
    assert_eq!((d.value, o.value), (n(1), n(3)));
    let (d, o) = uniform_closedness_moduli(&n(1), &id).unwrap();
    assert_eq!((d.value, o.value), (n(3), n(7)));
    let ten = SigmaFamily::Uniform(cf("affine:10,10"));
    assert_eq!(uniform_closedness_moduli(&n(1), &ten).unwrap().1.value, n(40));
    let indexed = SigmaFamily::Indexed(vec![cf("const:1"), cf("const:50")]);
    assert_eq!(uniform_closedness_moduli(&n(1), &indexed).unwrap().1.value, n(50));
    assert!(matches!(
        uniform_closedness_moduli(&n(2), &indexed),
        Err(RateError::MissingModulus(2))
    ));
}

#[test]
fn k0_examples() {
    let c = unit((1, 100), (0, 1), (0, 1), "const:0");
    assert_eq!(c.k0(&n(2), &SigmaFamily::Uniform(cf("affine:1,0"))).unwrap(), n(5));
    assert_eq!(c.k0(&n(0), &SigmaFamily::Uniform(cf("const:3"))).unwrap(), n(1));
}

#[test]
fn metastability_rate_uc_uses_delta_floor() {
    // c_u = 0, g = 0: Phi(n) = n + 1 and chi_k = max(delta(k), n)
    let c = unit((1, 100), (0, 1), (0, 1), "const:0");
    let sigma = SigmaFamily::Uniform(cf("const:0"));
    // k = 0: omega = 3, k0 = 1, P(1) = ceil(16/100) = 1, one level: Phi(max(1, 0)) = 2
    assert_eq!(c.metastability_rate_uc(&n(0), &cf("const:0"), &sigma).unwrap().value, n(2));
}

#[test]
fn derived_constants_examples() {
    let p = Precision::default();
    let d = derived_constants(&q(4, 1), &q(1, 1), &p).unwrap();
    assert_eq!(d.l_default, q(4, 1));
    let d = derived_constants(&q(1, 1), &q(1, 1), &p).unwrap();
    assert_eq!(d.e_default, q(1, 1));
    let d = derived_constants(&q(2, 1), &q(1, 1), &p).unwrap();
    assert!(d.e_default >= q(14142, 10000) && d.e_default <= q(14143, 10000));
    assert!(d.e_enclosure.lo() <= &q(14143, 10000) && d.e_enclosure.lo() >= &q(14142, 10000));
    assert!(derived_constants(&q(1, 1), &q(0, 1), &p).is_err());
}

#[test]
fn regularity_rate_examples() {
    let c = unit((2, 1), (1, 1), (0, 1), "const:0");
    let psi = RegularityModulus::new(cf("affine:1,0"));
    assert_eq!(c.regularity_convergence_rate(&n(0), &psi).unwrap().value, n(5_120_004));
    let c0 = unit((2, 1), (0, 1), (0, 1), "const:0");
    // index = psi + 1 = 3
    assert_eq!(c0.regularity_convergence_rate(&n(0), &psi).unwrap().value, n(4));
    let zero = RegularityModulus::new(cf("const:0"));
    let c = unit((2, 1), (1, 1), (0, 1), "affine:1,2");
    // index 1: 2 ceil(625 * 16 * 16) + max(1, tau(3) = 5) + 1
    assert_eq!(c.regularity_convergence_rate(&n(7), &zero).unwrap().value, n(2 * 160_000 + 6));
}

#[test]
fn bound_display_switches_to_digit_count() {
    let small = Bound::new(n(12345), "x");
    assert_eq!(small.to_string(), "12345");
    let big = Bound::new(num_traits::pow(n(10), 1500), "x");
    assert_eq!(big.digits(), 1501);
    assert_eq!(big.to_string(), "<1501 digits>");
    assert_eq!(decimal_digits(&n(0)), 1);
    assert_eq!(decimal_digits(&n(999)), 3);
    assert_eq!(decimal_digits(&n(1000)), 4);
}
