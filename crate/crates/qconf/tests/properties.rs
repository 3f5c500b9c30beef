//! Randomized algebraic laws over exact scalars: shift and derivation
//! identities on truncated series, operator basis round-trips, class-ring
//! isomorphisms, and matrix invariants.

use proptest::prelude::*;
use qconf::linalg::Mat;
use qconf::qop::{to_delta_form, to_sigma_form, OpBasis, PolyQ, QDiffOp};
use qconf::rings::{
    eta_to_monomial, gamma_eq, gamma_eq_inv, gamma_noneq, gamma_noneq_inv, monomial_to_eta,
    CohClassNonEq, KClassEq, KClassNonEq,
};
use qconf::scalar::{ratfunc_eval, Assignment, ComplexAP, RatFunc, Rational, Scalar, Var};
use qconf::series::{LogPoly, TruncSeries};

const TRUNC: i64 = 4;

fn rat(n: i64, d: i64) -> Rational {
    Rational::new(n.into(), d.into())
}

fn arb_rat() -> impl Strategy<Value = Rational> {
    (-9i64..=9, 1i64..=9).prop_map(|(n, d)| rat(n, d))
}

fn arb_nonzero_rat() -> impl Strategy<Value = Rational> {
    arb_rat().prop_filter("nonzero", |r| !Scalar::is_zero(r))
}

/// q strictly inside (0, 1), so q != 0 and q != 1 are automatic.
fn arb_q() -> impl Strategy<Value = Rational> {
    (2i64..=10).prop_flat_map(|d| (1..d).prop_map(move |n| rat(n, d)))
}

fn arb_series() -> impl Strategy<Value = TruncSeries<Rational>> {
    proptest::collection::vec(arb_rat(), (TRUNC + 1) as usize)
        .prop_map(|c| TruncSeries::from_coeffs(0, c, TRUNC, &rat(1, 1)))
}

fn arb_logpoly() -> impl Strategy<Value = LogPoly<Rational>> {
    proptest::collection::vec(arb_series(), 1..=3).prop_map(LogPoly::from_terms)
}

/// Distinct weights lambda_i = base + i step with step != 0.
fn arb_lambdas() -> impl Strategy<Value = Vec<Rational>> {
    (1usize..=3, arb_rat(), 1i64..=7, 1i64..=5).prop_map(|(n, base, sn, sd)| {
        (0..=n as i64)
            .map(|i| base.clone() + rat(sn, sd) * Rational::from_integer(i.into()))
            .collect()
    })
}

/// Distinct and invertible, as the multiplicative K-side weights must be.
fn arb_mult_weights() -> impl Strategy<Value = Vec<Rational>> {
    arb_lambdas().prop_filter("weights must be nonzero", |ls| {
        ls.iter().all(|l| !Scalar::is_zero(l))
    })
}

fn arb_eq_class_with_weights() -> impl Strategy<Value = (Vec<Rational>, KClassEq<Rational>)> {
    arb_mult_weights().prop_flat_map(|lams| {
        let m = lams.len();
        (
            Just(lams),
            proptest::collection::vec(arb_rat(), m).prop_map(KClassEq::new),
        )
    })
}

fn arb_noneq_class() -> impl Strategy<Value = KClassNonEq<Rational>> {
    proptest::collection::vec(arb_rat(), 1..=4).prop_map(KClassNonEq::new)
}

proptest! {
    #[test]
    fn sigma_shift_is_a_ring_morphism(a in arb_series(), b in arb_series(), q in arb_q()) {
        let sum = a.add(&b).sigma_shift(&q);
        prop_assert!(sum == a.sigma_shift(&q).add(&b.sigma_shift(&q)));
        let prod = a.mul(&b).sigma_shift(&q);
        prop_assert!(prod == a.sigma_shift(&q).mul(&b.sigma_shift(&q)));
    }

    #[test]
    fn delta_q_satisfies_the_twisted_leibniz_rule(
        a in arb_series(), b in arb_series(), q in arb_q(),
    ) {
        let lhs = a.mul(&b).delta_q(&q).unwrap();
        let rhs = a
            .delta_q(&q)
            .unwrap()
            .mul(&b.sigma_shift(&q))
            .add(&a.mul(&b.delta_q(&q).unwrap()));
        prop_assert!(lhs == rhs);
    }

    #[test]
    fn euler_operator_satisfies_leibniz(a in arb_series(), b in arb_series()) {
        let lhs = a.mul(&b).euler();
        let rhs = a.euler().mul(&b).add(&a.mul(&b.euler()));
        prop_assert!(lhs == rhs);
    }

    #[test]
    fn argument_scaling_is_a_ring_morphism(
        a in arb_series(), b in arb_series(), c in arb_nonzero_rat(),
    ) {
        let prod = a.mul(&b).scale_q(&c);
        prop_assert!(prod == a.scale_q(&c).mul(&b.scale_q(&c)));
    }

    #[test]
    fn series_inverse_multiplies_to_one(a in arb_series()) {
        prop_assume!(!Scalar::is_zero(&a.coeff(0)));
        let inv = a.invert().unwrap();
        let one = TruncSeries::constant(rat(1, 1), TRUNC);
        prop_assert!(a.mul(&inv) == one);
    }

    #[test]
    fn logpoly_sigma_respects_products(
        a in arb_logpoly(), b in arb_logpoly(), q in arb_q(),
    ) {
        // the L -> L + 1 shift must be compatible with multiplication
        let lhs = a.mul(&b).sigma(&q);
        let rhs = a.sigma(&q).mul(&b.sigma(&q));
        prop_assert!(lhs == rhs);
    }

    #[test]
    fn sigma_and_delta_operator_forms_round_trip(
        q in arb_q(),
        coeffs in proptest::collection::vec(
            proptest::collection::vec(arb_rat(), 1..=3), 0..=3,
        ),
        lead in arb_nonzero_rat(),
    ) {
        let proto = rat(1, 1);
        let mut polys: Vec<PolyQ<Rational>> = coeffs
            .into_iter()
            .map(|c| PolyQ::from_coeffs(&proto, c))
            .collect();
        polys.push(PolyQ::from_coeffs(&proto, vec![lead]));
        let op = QDiffOp::new(q, OpBasis::Sigma, polys);
        let delta = to_delta_form(&op).unwrap();
        prop_assert_eq!(delta.basis, OpBasis::Delta);
        let back = to_sigma_form(&delta).unwrap();
        prop_assert_eq!(back, op);
    }

    #[test]
    fn fixed_point_and_monomial_bases_round_trip(
        (lams, c) in arb_eq_class_with_weights(),
    ) {
        let poly = eta_to_monomial(&c, &lams).unwrap();
        let back = monomial_to_eta(&poly, &lams).unwrap();
        prop_assert_eq!(back, c);
    }

    #[test]
    fn indicator_classes_sum_to_the_unit_polynomial(lams in arb_mult_weights()) {
        // the unit class is constantly one, so its polynomial is 1
        let unit = KClassEq::unit(lams.len() - 1, &rat(1, 1));
        let poly = eta_to_monomial(&unit, &lams).unwrap();
        prop_assert_eq!(&poly[0], &rat(1, 1));
        for c in &poly[1..] {
            prop_assert!(Scalar::is_zero(c));
        }
    }

    #[test]
    fn gamma_noneq_is_a_ring_isomorphism(x in arb_noneq_class(), y in arb_noneq_class()) {
        prop_assume!(x.n() == y.n());
        let prod = gamma_noneq(&(x.clone() * &y));
        prop_assert_eq!(prod, gamma_noneq(&x) * &gamma_noneq(&y));
        prop_assert_eq!(gamma_noneq_inv(&gamma_noneq(&x)), x);
    }

    #[test]
    fn gamma_noneq_inv_round_trips_coh_classes(
        c in proptest::collection::vec(arb_rat(), 1..=4),
    ) {
        let x = CohClassNonEq::new(c);
        prop_assert_eq!(gamma_noneq(&gamma_noneq_inv(&x)), x);
    }

    #[test]
    fn gamma_eq_is_a_ring_isomorphism(
        (lams, x) in arb_eq_class_with_weights(),
        seed in proptest::collection::vec(arb_rat(), 4),
    ) {
        let y = KClassEq::new(seed.into_iter().cycle().take(lams.len()).collect());
        let gx = gamma_eq(&x, &lams).unwrap();
        let gy = gamma_eq(&y, &lams).unwrap();
        prop_assert_eq!(gamma_eq(&(x.clone() * &y), &lams).unwrap(), gx.clone() * &gy);
        prop_assert_eq!(gamma_eq_inv(&gx, &lams).unwrap(), x);
    }

    #[test]
    fn char_poly_exposes_trace_and_determinant(
        entries in proptest::collection::vec(arb_rat(), 9),
    ) {
        let rows: Vec<Vec<Rational>> = entries.chunks(3).map(|r| r.to_vec()).collect();
        let m = Mat::from_rows(rows);
        let p = m.char_poly();
        // det(x Id - M), ascending and monic
        prop_assert_eq!(&p[3], &rat(1, 1));
        prop_assert_eq!(p[2].clone(), -m.trace());
        prop_assert_eq!(p[0].clone(), -m.det());
    }

    #[test]
    fn rational_function_evaluation_is_a_homomorphism(
        terms_f in proptest::collection::vec((arb_rat(), 0u32..3, 0u32..3), 1..=3),
        terms_g in proptest::collection::vec((arb_rat(), 0u32..3, 0u32..3), 1..=3),
        qn in 1i64..=5, zn in -5i64..=5,
    ) {
        let build = |terms: Vec<(Rational, u32, u32)>| {
            let qv = RatFunc::var(Var::Q);
            let zv = RatFunc::var(Var::Z);
            let mut acc = RatFunc::zero();
            for (c, a, b) in terms {
                let t = RatFunc::constant(c)
                    * &qv.pow_i64(a as i64).unwrap()
                    * &zv.pow_i64(b as i64).unwrap();
                acc = acc + &t;
            }
            acc
        };
        let f = build(terms_f);
        let g = build(terms_g);
        let proto = ComplexAP::zero(192);
        let mut assign = Assignment::new();
        assign.insert(Var::Q, proto.from_rational(&rat(qn, 7)));
        assign.insert(Var::Z, proto.from_rational(&rat(zn, 3)));
        let lhs = ratfunc_eval(&(f.clone() * &g), &assign).unwrap();
        let rhs = ratfunc_eval(&f, &assign).unwrap() * &ratfunc_eval(&g, &assign).unwrap();
        prop_assert!(lhs.dist(&rhs).to_f64() < 1e-45);
    }
}
