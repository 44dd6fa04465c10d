//! Property tests over randomly drawn family parameters and points.

use num_complex::Complex64;
use proptest::prelude::*;

use orlicz_bellman::bellman::BellmanContext;
use orlicz_bellman::ellipticity::{delta_p, lambda_min, MatrixField};
use orlicz_bellman::harness::apply_overrides;
use orlicz_bellman::harness::oracles::legendre_sup;
use orlicz_bellman::report::MarginReport;
use orlicz_bellman::semigroup::{evolve, DiscreteOperator, Grid, GridFunction};
use orlicz_bellman::young::{conjugate, make_family, ConjugatePair, FamilySpec};

fn family() -> impl Strategy<Value = FamilySpec> {
    prop_oneof![
        (2.2f64..8.0).prop_map(|p| FamilySpec::PowerLaw { p }),
        (2.2f64..6.0).prop_map(|r| FamilySpec::ZygmundLog { r }),
        (2.2f64..4.0, 0.1f64..3.0, 0.01f64..1.0).prop_map(|(r, dp, eps)| FamilySpec::PowerSum { p: r + dp, r, eps }),
    ]
}

fn log_point() -> impl Strategy<Value = f64> {
    (-3.0f64..3.0).prop_map(|x| 10f64.powf(x))
}

proptest! {
    #![proptest_config(ProptestConfig { cases: 48, ..ProptestConfig::default() })]

    #[test]
    fn young_inequality(spec in family(), s in log_point(), t in log_point()) {
        let pair = ConjugatePair::from_spec(spec).unwrap();
        let rhs = pair.phi.eval(s) + pair.psi.eval(t);
        prop_assert!(s * t <= rhs * (1.0 + 1e-12), "{spec}: {} > {rhs}", s * t);
    }

    #[test]
    fn young_equality_on_the_derivative(spec in family(), s in log_point()) {
        let pair = ConjugatePair::from_spec(spec).unwrap();
        let t = pair.phi.d1(s);
        let sum = pair.phi.eval(s) + pair.psi.eval(t);
        prop_assert!((sum - s * t).abs() <= 1e-8 * s * t, "{spec}: {sum} vs {}", s * t);
    }

    #[test]
    fn conjugation_is_an_involution(spec in family(), s in log_point()) {
        let phi = make_family(spec).unwrap();
        let back = conjugate(&conjugate(&phi));
        let (x, y) = (back.eval(s), phi.eval(s));
        prop_assert!((x - y).abs() <= 1e-6 * y, "{spec} at {s}: {x} vs {y}");
    }

    #[test]
    fn power_conjugate_matches_brute_force(p in 2.2f64..8.0, t in log_point()) {
        let phi = make_family(FamilySpec::PowerLaw { p }).unwrap();
        let psi = conjugate(&phi);
        let sup = legendre_sup(|s| s.powf(p) / p, t);
        prop_assert!((psi.eval(t) - sup).abs() <= 1e-8 * sup);
    }

    #[test]
    fn quantities_are_ordered(spec in family()) {
        let q = ConjugatePair::from_spec(spec).unwrap().quantities;
        prop_assert!(q.m <= q.big_m && q.m_tilde <= q.big_m_tilde);
        // equality cases are limits the finite scan window only approaches
        let slack = orlicz_bellman::harness::scan_tolerance(&spec);
        prop_assert!(q.m_tilde + 1.0 <= q.m + slack);
        prop_assert!(q.big_m <= q.big_m_tilde + 1.0 + slack);
        prop_assert!(q.m_tilde > 1.0 && q.d >= 1.0);
    }

    #[test]
    fn bellman_phase_invariance(p in 2.2f64..8.0, a in log_point(), b in log_point(), t1 in 0.0f64..6.3, t2 in 0.0f64..6.3) {
        let ctx = BellmanContext::identity(ConjugatePair::from_spec(FamilySpec::PowerLaw { p }).unwrap(), 2).unwrap();
        let x = ctx.eval(Complex64::new(a, 0.0), Complex64::new(b, 0.0)).unwrap();
        let y = ctx.eval(Complex64::from_polar(a, t1), Complex64::from_polar(b, t2)).unwrap();
        prop_assert!((x - y).abs() <= 1e-14 * x);
        prop_assert!(x <= ctx.size_bound(a, b));
        prop_assert!(x >= 0.0);
    }

    #[test]
    fn delta_two_is_lambda(phi in -1.5f64..1.5) {
        let a = MatrixField::rotation(phi, 2);
        prop_assert!((delta_p(&a, 2.0).unwrap() - lambda_min(&a)).abs() < 1e-12);
    }

    #[test]
    fn pass_rule(margin in -1.0f64..1.0, tol in 0.0f64..0.5) {
        let r = MarginReport::new("x", 1, margin, vec![], tol);
        prop_assert_eq!(r.pass, margin >= -tol);
        let mut v = vec![r];
        let mut o = std::collections::BTreeMap::new();
        o.insert("x".to_string(), 1.0);
        apply_overrides(&mut v, &o);
        prop_assert!(v[0].pass);
    }
}

proptest! {
    #![proptest_config(ProptestConfig { cases: 16, ..ProptestConfig::default() })]

    #[test]
    fn semigroup_contracts_and_preserves_mean(
        phi in -0.9f64..0.9,
        re in proptest::collection::vec(-1.0f64..1.0, 16),
        im in proptest::collection::vec(-1.0f64..1.0, 16),
        t in 0.01f64..1.0,
    ) {
        let g = Grid::new(1, 16, 1.0).unwrap();
        let f = GridFunction::new(g, re.iter().zip(&im).map(|(a, b)| Complex64::new(*a, *b)).collect()).unwrap();
        let op = DiscreteOperator::assemble(&MatrixField::rotation(phi, 1), g).unwrap();
        let u = evolve(&op, &f, t).unwrap();
        prop_assert!(u.l2_norm() <= f.l2_norm() * (1.0 + 1e-9));
        prop_assert!((u.mean() - f.mean()).norm() <= 1e-9 * (1.0 + f.mean().norm()));
    }
}
