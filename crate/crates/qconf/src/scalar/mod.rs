//! Coefficient fields: exact rationals, exact multivariate rational
//! functions, and arbitrary-precision complex numbers, behind one trait.

pub mod complex;
pub mod poly;
pub mod ratfunc;

use std::collections::BTreeMap;

use num_rational::BigRational;
use num_traits::{One, Zero};

pub use complex::{float_from_bigrational, float_to_decimal, ComplexAP, DEFAULT_PRECISION, MIN_PRECISION};
pub use poly::{Monomial, Poly, Var};
pub use ratfunc::RatFunc;

use crate::error::{Error, Result};

/// Exact rationals, re-exported as the base coefficient type.
pub type Rational = BigRational;

/// Common interface of the coefficient fields. Elements carry their own
/// context (variable set, precision), so constants are made "like" an
/// existing element.
pub trait Scalar:
    Clone
    + std::fmt::Debug
    + PartialEq
    + for<'a> std::ops::Add<&'a Self, Output = Self>
    + for<'a> std::ops::Sub<&'a Self, Output = Self>
    + for<'a> std::ops::Mul<&'a Self, Output = Self>
    + std::ops::Neg<Output = Self>
{
    /// Exact fields admit identity-level zero tests; numeric fields only a
    /// noise-floor test.
    const EXACT: bool;

    fn zero_like(&self) -> Self;
    fn one_like(&self) -> Self;
    fn from_rational(&self, r: &Rational) -> Self;
    fn is_zero(&self) -> bool;
    fn inv(&self) -> Result<Self>;

    fn from_i64(&self, n: i64) -> Self {
        self.from_rational(&Rational::from_integer(n.into()))
    }

    fn div_by(&self, o: &Self) -> Result<Self> {
        Ok(self.clone() * &o.inv()?)
    }

    fn pow_i64(&self, k: i64) -> Result<Self> {
        if k == 0 {
            return Ok(self.one_like());
        }
        let base = if k < 0 { self.inv()? } else { self.clone() };
        let mut e = k.unsigned_abs();
        let mut acc = self.one_like();
        let mut b = base;
        while e > 0 {
            if e & 1 == 1 {
                acc = acc * &b;
            }
            e >>= 1;
            if e > 0 {
                b = b.clone() * &b;
            }
        }
        Ok(acc)
    }

    /// Whether two elements belong to the same realization of the field
    /// (e.g. equal floating precision).
    fn same_field(&self, _other: &Self) -> bool {
        true
    }
}

impl Scalar for BigRational {
    const EXACT: bool = true;

    fn zero_like(&self) -> Self {
        BigRational::zero()
    }

    fn one_like(&self) -> Self {
        BigRational::one()
    }

    fn from_rational(&self, r: &Rational) -> Self {
        r.clone()
    }

    fn is_zero(&self) -> bool {
        Zero::is_zero(self)
    }

    fn inv(&self) -> Result<Self> {
        if Zero::is_zero(self) {
            return Err(Error::DivisionByZero);
        }
        Ok(self.recip())
    }
}

impl Scalar for RatFunc {
    const EXACT: bool = true;

    fn zero_like(&self) -> Self {
        RatFunc::zero()
    }

    fn one_like(&self) -> Self {
        RatFunc::one()
    }

    fn from_rational(&self, r: &Rational) -> Self {
        RatFunc::constant(r.clone())
    }

    fn is_zero(&self) -> bool {
        RatFunc::is_zero(self)
    }

    fn inv(&self) -> Result<Self> {
        RatFunc::inv(self)
    }
}

impl Scalar for ComplexAP {
    const EXACT: bool = false;

    fn zero_like(&self) -> Self {
        ComplexAP::zero(self.prec())
    }

    fn one_like(&self) -> Self {
        ComplexAP::one(self.prec())
    }

    fn from_rational(&self, r: &Rational) -> Self {
        ComplexAP::real_from_rational(self.prec(), r)
    }

    fn is_zero(&self) -> bool {
        self.is_negligible()
    }

    fn inv(&self) -> Result<Self> {
        self.recip()
    }

    fn same_field(&self, other: &Self) -> bool {
        self.prec() == other.prec()
    }
}

/// Numeric assignment of values to indeterminates.
pub type Assignment = BTreeMap<Var, ComplexAP>;

/// Evaluate a rational function at complex values. Errors on unassigned
/// variables and on denominators below the noise floor.
pub fn ratfunc_eval(f: &RatFunc, assign: &Assignment) -> Result<ComplexAP> {
    let proto = assign
        .values()
        .next()
        .cloned()
        .unwrap_or_else(|| ComplexAP::zero(DEFAULT_PRECISION));
    let num = poly_eval(f.num(), assign, &proto)?;
    let den = poly_eval(f.den(), assign, &proto)?;
    if den.is_negligible() {
        return Err(Error::NearZeroDenominator(format!("{:e}", den.abs().to_f64())));
    }
    num.div_c(&den)
}

fn poly_eval(p: &Poly, assign: &Assignment, proto: &ComplexAP) -> Result<ComplexAP> {
    let mut acc = proto.zero_like();
    for (m, c) in p.terms() {
        let mut term = proto.from_rational(c);
        for v in m.vars() {
            let val = assign
                .get(&v)
                .ok_or_else(|| Error::MissingVariable(v.to_string()))?;
            term = term.mul_c(&val.pow_i64(m.exponent(v) as i64)?);
        }
        acc = acc.add_c(&term);
    }
    Ok(acc)
}

/// exp(e * Log b) with the principal branch of Log.
pub fn principal_power(base: &ComplexAP, exponent: &ComplexAP) -> Result<ComplexAP> {
    base.pow(exponent)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn ratfunc_eval_simplifies_pole_free_point() {
        // (1-q)/(1-q^2) at q = 0.5 -> 2/3
        let one = RatFunc::one();
        let q = RatFunc::var(Var::Q);
        let f = one.sub(&q).div(&one.sub(&q.mul(&q))).unwrap();
        let mut assign = Assignment::new();
        assign.insert(Var::Q, ComplexAP::from_f64(128, 0.5, 0.0));
        let v = ratfunc_eval(&f, &assign).unwrap();
        assert!((v.re().to_f64() - 2.0 / 3.0).abs() < 1e-30);
        assert!(v.im().to_f64().abs() < 1e-30);
    }

    #[test]
    fn ratfunc_eval_identity() {
        let q = RatFunc::var(Var::Q);
        let mut assign = Assignment::new();
        assign.insert(Var::Q, ComplexAP::from_f64(128, 1.0, 0.0));
        let v = ratfunc_eval(&q, &assign).unwrap();
        assert!((v.re().to_f64() - 1.0).abs() < 1e-30);
    }

    #[test]
    fn ratfunc_eval_near_pole_rejected() {
        // 1/(1-q) at q = 1
        let one = RatFunc::one();
        let q = RatFunc::var(Var::Q);
        let f = one.div(&one.sub(&q)).unwrap();
        let mut assign = Assignment::new();
        assign.insert(Var::Q, ComplexAP::from_f64(128, 1.0, 0.0));
        assert!(matches!(
            ratfunc_eval(&f, &assign),
            Err(Error::NearZeroDenominator(_))
        ));
    }

    #[test]
    fn ratfunc_eval_missing_variable() {
        let f = RatFunc::var(Var::Z);
        let mut assign = Assignment::new();
        assign.insert(Var::Q, ComplexAP::from_f64(128, 0.5, 0.0));
        assert!(matches!(
            ratfunc_eval(&f, &assign),
            Err(Error::MissingVariable(_))
        ));
    }

    #[test]
    fn principal_power_matches_repeated_multiplication() {
        let b = ComplexAP::from_f64(256, 0.7, 0.4);
        let e5 = ComplexAP::from_f64(256, 5.0, 0.0);
        let via_pow = principal_power(&b, &e5).unwrap();
        let via_mul = b.pow_i64(5).unwrap();
        assert!(via_pow.approx_eq(&via_mul, 1e-70));
    }

    #[test]
    fn rational_scalar_field_ops() {
        let half = BigRational::new(1.into(), 2.into());
        assert_eq!(half.inv().unwrap(), BigRational::new(2.into(), 1.into()));
        assert!(Scalar::is_zero(&half.zero_like()));
        assert!(matches!(half.zero_like().inv(), Err(Error::DivisionByZero)));
    }
}
