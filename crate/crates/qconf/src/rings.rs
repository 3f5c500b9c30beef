//! Coefficient rings of projective space: equivariant and non-equivariant
//! K-theory and cohomology, plus the comparison maps between them.
//!
//! Non-equivariant classes are truncated polynomials in a nilpotent generator
//! (pi = 1 - P^{-1} on the K side, H on the cohomology side). Equivariant
//! classes are stored as their values at the fixed points, where the basis
//! idempotents make multiplication componentwise.

use std::collections::{BTreeMap, BTreeSet};
use std::ops::{Add, Mul, Neg, Sub};

use num_traits::One;

use crate::error::{Error, Result};
use crate::scalar::{Poly, RatFunc, Rational, Scalar, Var};

macro_rules! truncated_class {
    ($(#[$meta:meta])* $name:ident) => {
        $(#[$meta])*
        #[derive(Debug, Clone, PartialEq)]
        pub struct $name<S: Scalar> {
            c: Vec<S>,
        }

        impl<S: Scalar> $name<S> {
            /// Class sum c_k x^k from its N+1 coefficients.
            pub fn new(c: Vec<S>) -> Self {
                assert!(!c.is_empty(), "a class needs at least one coefficient");
                $name { c }
            }

            pub fn zero(n: usize, proto: &S) -> Self {
                $name { c: vec![proto.zero_like(); n + 1] }
            }

            pub fn unit(n: usize, proto: &S) -> Self {
                let mut c = vec![proto.zero_like(); n + 1];
                c[0] = proto.one_like();
                $name { c }
            }

            /// x^k as a class; zero when k > N by nilpotency.
            pub fn generator_power(n: usize, k: usize, proto: &S) -> Self {
                let mut c = vec![proto.zero_like(); n + 1];
                if k <= n {
                    c[k] = proto.one_like();
                }
                $name { c }
            }

            pub fn n(&self) -> usize {
                self.c.len() - 1
            }

            pub fn coeff(&self, k: usize) -> &S {
                &self.c[k]
            }

            pub fn coeffs(&self) -> &[S] {
                &self.c
            }

            pub fn mul_scalar(&self, s: &S) -> Self {
                $name { c: self.c.iter().map(|a| a.clone() * s).collect() }
            }

            pub fn map<T: Scalar>(&self, f: impl Fn(&S) -> T) -> $name<T> {
                $name { c: self.c.iter().map(f).collect() }
            }

            /// Inverse mod x^{N+1}; needs an invertible constant term.
            pub fn invert(&self) -> Result<Self> {
                let u = self.c[0].inv()?;
                let mut b = vec![self.c[0].zero_like(); self.c.len()];
                b[0] = u.clone();
                for k in 1..self.c.len() {
                    let mut acc = self.c[0].zero_like();
                    for j in 1..=k {
                        acc = acc + &(self.c[j].clone() * &b[k - j]);
                    }
                    b[k] = (-acc) * &u;
                }
                Ok($name { c: b })
            }

            /// Horner evaluation of sum c_k x^k at a point.
            pub fn eval_at(&self, x: &S) -> S {
                let mut acc = self.c.last().unwrap().clone();
                for k in (0..self.c.len() - 1).rev() {
                    acc = acc * x + &self.c[k];
                }
                acc
            }
        }

        impl<S: Scalar> Add<&$name<S>> for $name<S> {
            type Output = $name<S>;
            fn add(self, o: &$name<S>) -> $name<S> {
                assert_eq!(self.c.len(), o.c.len());
                $name {
                    c: self.c.into_iter().zip(&o.c).map(|(a, b)| a + b).collect(),
                }
            }
        }

        impl<S: Scalar> Sub<&$name<S>> for $name<S> {
            type Output = $name<S>;
            fn sub(self, o: &$name<S>) -> $name<S> {
                assert_eq!(self.c.len(), o.c.len());
                $name {
                    c: self.c.into_iter().zip(&o.c).map(|(a, b)| a - b).collect(),
                }
            }
        }

        impl<S: Scalar> Neg for $name<S> {
            type Output = $name<S>;
            fn neg(self) -> $name<S> {
                $name { c: self.c.into_iter().map(|a| -a).collect() }
            }
        }

        impl<S: Scalar> Mul<&$name<S>> for $name<S> {
            type Output = $name<S>;
            fn mul(self, o: &$name<S>) -> $name<S> {
                assert_eq!(self.c.len(), o.c.len());
                let len = self.c.len();
                let mut c = vec![self.c[0].zero_like(); len];
                for i in 0..len {
                    for j in 0..len - i {
                        c[i + j] = c[i + j].clone() + &(self.c[i].clone() * &o.c[j]);
                    }
                }
                $name { c }
            }
        }

        impl<S: Scalar> Scalar for $name<S> {
            const EXACT: bool = S::EXACT;

            fn zero_like(&self) -> Self {
                $name { c: self.c.iter().map(|a| a.zero_like()).collect() }
            }

            fn one_like(&self) -> Self {
                Self::unit(self.n(), &self.c[0])
            }

            fn from_rational(&self, r: &Rational) -> Self {
                let mut c: Vec<S> = self.c.iter().map(|a| a.zero_like()).collect();
                c[0] = self.c[0].from_rational(r);
                $name { c }
            }

            fn is_zero(&self) -> bool {
                self.c.iter().all(|a| a.is_zero())
            }

            fn inv(&self) -> Result<Self> {
                self.invert()
            }

            fn same_field(&self, o: &Self) -> bool {
                self.c.len() == o.c.len() && self.c[0].same_field(&o.c[0])
            }
        }
    };
}

truncated_class!(
    /// Non-equivariant K-class of P^N written in powers of pi = 1 - P^{-1},
    /// reduced mod pi^{N+1}.
    KClassNonEq
);
truncated_class!(
    /// Non-equivariant cohomology class of P^N written in powers of the
    /// hyperplane class H, reduced mod H^{N+1}.
    CohClassNonEq
);

macro_rules! fixed_point_class {
    ($(#[$meta:meta])* $name:ident) => {
        $(#[$meta])*
        #[derive(Debug, Clone, PartialEq)]
        pub struct $name<S: Scalar> {
            v: Vec<S>,
        }

        impl<S: Scalar> $name<S> {
            pub fn new(v: Vec<S>) -> Self {
                assert!(!v.is_empty(), "a class needs at least one fixed point");
                $name { v }
            }

            pub fn unit(n: usize, proto: &S) -> Self {
                $name { v: vec![proto.one_like(); n + 1] }
            }

            /// The i-th basis idempotent: value 1 at fixed point i, 0 elsewhere.
            pub fn indicator(n: usize, i: usize, proto: &S) -> Self {
                let mut v = vec![proto.zero_like(); n + 1];
                v[i] = proto.one_like();
                $name { v }
            }

            pub fn n(&self) -> usize {
                self.v.len() - 1
            }

            pub fn value(&self, i: usize) -> &S {
                &self.v[i]
            }

            pub fn values(&self) -> &[S] {
                &self.v
            }

            pub fn mul_scalar(&self, s: &S) -> Self {
                $name { v: self.v.iter().map(|a| a.clone() * s).collect() }
            }

            pub fn invert(&self) -> Result<Self> {
                Ok($name {
                    v: self.v.iter().map(|a| a.inv()).collect::<Result<_>>()?,
                })
            }

            pub fn is_zero(&self) -> bool {
                self.v.iter().all(|a| a.is_zero())
            }
        }

        impl<S: Scalar> Add<&$name<S>> for $name<S> {
            type Output = $name<S>;
            fn add(self, o: &$name<S>) -> $name<S> {
                assert_eq!(self.v.len(), o.v.len());
                $name {
                    v: self.v.into_iter().zip(&o.v).map(|(a, b)| a + b).collect(),
                }
            }
        }

        impl<S: Scalar> Mul<&$name<S>> for $name<S> {
            type Output = $name<S>;
            fn mul(self, o: &$name<S>) -> $name<S> {
                assert_eq!(self.v.len(), o.v.len());
                $name {
                    v: self.v.into_iter().zip(&o.v).map(|(a, b)| a * b).collect(),
                }
            }
        }

        impl<S: Scalar> Neg for $name<S> {
            type Output = $name<S>;
            fn neg(self) -> $name<S> {
                $name { v: self.v.into_iter().map(|a| -a).collect() }
            }
        }
    };
}

fixed_point_class!(
    /// Equivariant K-class of P^N in the fixed-point basis: component i is the
    /// value of the class under P -> Lambda_i.
    KClassEq
);
fixed_point_class!(
    /// Equivariant cohomology class of P^N in the fixed-point basis: component
    /// i is the value at H = lambda_i.
    CohClassEq
);

fn ensure_distinct<S: Scalar>(points: &[S], what: &str) -> Result<()> {
    for i in 0..points.len() {
        for j in i + 1..points.len() {
            if (points[i].clone() - &points[j]).is_zero() {
                return Err(Error::CoincidingEquivariantParameters(format!(
                    "{what} {i} and {j} coincide"
                )));
            }
        }
    }
    Ok(())
}

/// Coefficients (ascending) of the unique degree-below-len polynomial through
/// the given node/value pairs.
pub fn lagrange_interpolate<S: Scalar>(nodes: &[S], values: &[S]) -> Result<Vec<S>> {
    assert_eq!(nodes.len(), values.len());
    ensure_distinct(nodes, "interpolation nodes")?;
    let proto = &nodes[0];
    let n = nodes.len();
    let mut out = vec![proto.zero_like(); n];
    for i in 0..n {
        let mut num = vec![proto.one_like()];
        let mut den = proto.one_like();
        for (j, node) in nodes.iter().enumerate() {
            if j == i {
                continue;
            }
            let mut next = vec![proto.zero_like(); num.len() + 1];
            for (k, a) in num.iter().enumerate() {
                next[k + 1] = next[k + 1].clone() + a;
                next[k] = next[k].clone() - &(a.clone() * node);
            }
            num = next;
            den = den * &(nodes[i].clone() - node);
        }
        let scale = values[i].clone() * &den.inv()?;
        for (k, a) in num.iter().enumerate() {
            out[k] = out[k].clone() + &(a.clone() * &scale);
        }
    }
    Ok(out)
}

fn horner<S: Scalar>(coeffs: &[S], x: &S) -> S {
    let mut acc = coeffs.last().unwrap().clone();
    for k in (0..coeffs.len() - 1).rev() {
        acc = acc * x + &coeffs[k];
    }
    acc
}

/// Change of basis from fixed-point values to the polynomial in P^{-1}:
/// coefficients (ascending in P^{-1}) of the unique degree-at-most-N
/// polynomial p with p(Lambda_i^{-1}) = v_i.
pub fn eta_to_monomial<S: Scalar>(x: &KClassEq<S>, lambdas: &[S]) -> Result<Vec<S>> {
    assert_eq!(x.n() + 1, lambdas.len());
    ensure_distinct(lambdas, "equivariant parameters")?;
    let nodes: Vec<S> = lambdas.iter().map(|l| l.inv()).collect::<Result<_>>()?;
    lagrange_interpolate(&nodes, x.values())
}

/// Inverse of [`eta_to_monomial`]: evaluate a polynomial in P^{-1} at every
/// fixed point.
pub fn monomial_to_eta<S: Scalar>(poly: &[S], lambdas: &[S]) -> Result<KClassEq<S>> {
    ensure_distinct(lambdas, "equivariant parameters")?;
    let v = lambdas
        .iter()
        .map(|l| Ok(horner(poly, &l.inv()?)))
        .collect::<Result<_>>()?;
    Ok(KClassEq::new(v))
}

/// Rewrites p(x) as a polynomial in 1 - x. Since pi = 1 - P^{-1} and
/// P^{-1} = 1 - pi, this one map converts both ways between the P^{-1} and pi
/// coefficient lists; it is an involution.
pub fn reflect_poly<S: Scalar>(coeffs: &[S]) -> Vec<S> {
    let proto = &coeffs[0];
    let mut out = vec![proto.zero_like(); coeffs.len()];
    let mut pow = vec![proto.one_like()];
    for (k, c) in coeffs.iter().enumerate() {
        if k > 0 {
            let mut next = vec![proto.zero_like(); pow.len() + 1];
            for (m, a) in pow.iter().enumerate() {
                next[m] = next[m].clone() + a;
                next[m + 1] = next[m + 1].clone() - a;
            }
            pow = next;
        }
        for (m, a) in pow.iter().enumerate() {
            out[m] = out[m].clone() + &(a.clone() * c);
        }
    }
    out
}

/// Builds a K-class from a polynomial in P^{-1} of degree at most N.
pub fn kclass_from_p_inverse_poly<S: Scalar>(poly: &[S]) -> KClassNonEq<S> {
    KClassNonEq::new(reflect_poly(poly))
}

/// Coefficients of a K-class as a polynomial in P^{-1}.
pub fn kclass_to_p_inverse_poly<S: Scalar>(x: &KClassNonEq<S>) -> Vec<S> {
    reflect_poly(x.coeffs())
}

/// The comparison map on non-equivariant classes: pi^k goes to H^k.
pub fn gamma_noneq<S: Scalar>(x: &KClassNonEq<S>) -> CohClassNonEq<S> {
    CohClassNonEq::new(x.coeffs().to_vec())
}

pub fn gamma_noneq_inv<S: Scalar>(x: &CohClassNonEq<S>) -> KClassNonEq<S> {
    KClassNonEq::new(x.coeffs().to_vec())
}

/// The equivariant comparison map: fixed-point values are carried across, so
/// the K-theoretic idempotent at fixed point i maps to the cohomological
/// idempotent at fixed point i.
pub fn gamma_eq<S: Scalar>(x: &KClassEq<S>, lambdas: &[S]) -> Result<CohClassEq<S>> {
    ensure_distinct(lambdas, "equivariant parameters")?;
    Ok(CohClassEq::new(x.values().to_vec()))
}

pub fn gamma_eq_inv<S: Scalar>(x: &CohClassEq<S>, lambdas: &[S]) -> Result<KClassEq<S>> {
    ensure_distinct(lambdas, "equivariant parameters")?;
    Ok(KClassEq::new(x.values().to_vec()))
}

const PATH_VAR: Var = Var::LambdaH(u32::MAX);

/// Sends Lambda_i -> 1 in the monomial-basis coefficients of an equivariant
/// K-class. Fails with DegenerateBasis when a coefficient has a pole there,
/// which is exactly the fixed-point basis degenerating.
pub fn noneq_limit(x: &KClassEq<RatFunc>, lambdas: &[RatFunc]) -> Result<KClassNonEq<RatFunc>> {
    let mono = eta_to_monomial(x, lambdas)?;
    let mut kvars: BTreeSet<Var> = BTreeSet::new();
    for f in mono.iter().chain(lambdas.iter()) {
        for v in f.num().vars().into_iter().chain(f.den().vars()) {
            if matches!(v, Var::LambdaK(_)) {
                kvars.insert(v);
            }
        }
    }
    let direct: BTreeMap<Var, Rational> =
        kvars.iter().map(|&v| (v, Rational::one())).collect();
    let limited: Vec<RatFunc> = mono
        .iter()
        .map(|f| limit_at_one(f, &kvars, &direct))
        .collect::<Result<_>>()?;
    Ok(kclass_from_p_inverse_poly(&limited))
}

/// Value at Lambda = (1,...,1). Tries direct substitution; a 0/0 in the
/// stored fraction is retried along the path Lambda_i = 1 + c_i eps with
/// distinct c_i, cancelling the shared eps factor before evaluating at
/// eps = 0. A pole that survives the cancellation is the degenerate case.
fn limit_at_one(
    f: &RatFunc,
    kvars: &BTreeSet<Var>,
    direct: &BTreeMap<Var, Rational>,
) -> Result<RatFunc> {
    if let Ok(v) = f.substitute(direct) {
        return Ok(v);
    }
    let mut g = f.clone();
    for (idx, &v) in kvars.iter().enumerate() {
        let path = Poly::one().add(
            &Poly::var(PATH_VAR).mul_scalar(&Rational::from_integer((idx as i64 + 1).into())),
        );
        g = g.substitute_poly(v, &path).map_err(|_| {
            Error::DegenerateBasis("denominator vanishes identically along the limit path".into())
        })?;
    }
    g.reduce();
    let at_zero: BTreeMap<Var, Rational> = [(PATH_VAR, num_traits::Zero::zero())].into();
    g.substitute(&at_zero).map_err(|_| {
        Error::DegenerateBasis("monomial coefficient has a pole at Lambda = 1".into())
    })
}
