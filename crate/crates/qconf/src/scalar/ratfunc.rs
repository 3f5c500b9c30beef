//! Exact multivariate rational functions, the coefficient field for all
//! symbolic computations.

use std::collections::BTreeMap;
use std::fmt;

use num_bigint::BigInt;
use num_integer::Integer;
use num_rational::BigRational;
use num_traits::{One, Zero};

use super::poly::{Poly, Var};
use crate::error::{Error, Result};

/// Quotient of two multivariate polynomials. The denominator is never zero;
/// after every operation common monomial factors are cancelled and the
/// denominator's leading coefficient is scaled to 1. Full gcd cancellation is
/// applied only in the univariate case, lazily once degrees grow.
#[derive(Clone, Debug)]
pub struct RatFunc {
    num: Poly,
    den: Poly,
}

/// Denominator degree beyond which univariate quotients are gcd-reduced
/// eagerly; below it reduction is deferred to `reduce`/display.
const UNIVARIATE_REDUCE_THRESHOLD: u32 = 64;

impl RatFunc {
    pub fn new(num: Poly, den: Poly) -> Result<Self> {
        if den.is_zero() {
            return Err(Error::DivisionByZero);
        }
        let mut f = RatFunc { num, den };
        f.normalize();
        Ok(f)
    }

    pub fn from_poly(p: Poly) -> Self {
        RatFunc {
            num: p,
            den: Poly::one(),
        }
    }

    pub fn zero() -> Self {
        RatFunc::from_poly(Poly::zero())
    }

    pub fn one() -> Self {
        RatFunc::from_poly(Poly::one())
    }

    pub fn constant(c: BigRational) -> Self {
        RatFunc::from_poly(Poly::constant(c))
    }

    pub fn from_i64(n: i64) -> Self {
        RatFunc::from_poly(Poly::from_i64(n))
    }

    pub fn var(v: Var) -> Self {
        RatFunc::from_poly(Poly::var(v))
    }

    pub fn num(&self) -> &Poly {
        &self.num
    }

    pub fn den(&self) -> &Poly {
        &self.den
    }

    pub fn is_zero(&self) -> bool {
        self.num.is_zero()
    }

    pub fn as_constant(&self) -> Option<BigRational> {
        match (self.num.as_constant(), self.den.as_constant()) {
            (Some(n), Some(d)) => Some(n / d),
            _ => None,
        }
    }

    fn normalize(&mut self) {
        if self.num.is_zero() {
            self.den = Poly::one();
            return;
        }
        let g = self.num.monomial_content().gcd(&self.den.monomial_content());
        if !g.is_one() {
            self.num = self.num.div_monomial(&g);
            self.den = self.den.div_monomial(&g);
        }
        if let Some(v) = uni_var(&self.num, &self.den) {
            if self.den.degree_in(v) > UNIVARIATE_REDUCE_THRESHOLD {
                self.reduce_univariate();
            }
        }
        let lead = self.den.leading().expect("nonzero denominator").1.clone();
        if !lead.is_one() {
            let inv = lead.recip();
            self.num = self.num.mul_scalar(&inv);
            self.den = self.den.mul_scalar(&inv);
        }
    }

    /// Replaces one variable by a polynomial in both numerator and
    /// denominator. Fails if the denominator collapses to zero.
    pub fn substitute_poly(&self, v: Var, g: &Poly) -> Result<Self> {
        RatFunc::new(
            self.num.substitute_poly(v, g),
            self.den.substitute_poly(v, g),
        )
    }

    /// Cancel the polynomial gcd when numerator and denominator involve at
    /// most one common variable. No-op otherwise.
    pub fn reduce(&mut self) {
        if uni_var(&self.num, &self.den).is_some() {
            self.reduce_univariate();
            let lead = self.den.leading().expect("nonzero denominator").1.clone();
            if !lead.is_one() {
                let inv = lead.recip();
                self.num = self.num.mul_scalar(&inv);
                self.den = self.den.mul_scalar(&inv);
            }
        }
    }

    fn reduce_univariate(&mut self) {
        let v = match uni_var(&self.num, &self.den) {
            Some(v) => v,
            None => return,
        };
        let a = match self.num.univariate_in(v) {
            Some(a) => a,
            None => return,
        };
        let b = match self.den.univariate_in(v) {
            Some(b) => b,
            None => return,
        };
        let g = univar_gcd(&a, &b);
        if g.len() > 1 {
            let qn = univar_div_exact(&a, &g);
            let qd = univar_div_exact(&b, &g);
            self.num = Poly::from_univariate(v, &qn);
            self.den = Poly::from_univariate(v, &qd);
        }
    }

    pub fn add(&self, other: &Self) -> Self {
        if self.num.is_zero() {
            return other.clone();
        }
        if other.num.is_zero() {
            return self.clone();
        }
        // When one denominator divides the other (the common case in series
        // coefficients, whose denominators nest degree by degree), reuse the
        // larger one instead of multiplying them out.
        let (num, den) = if self.den == other.den {
            (self.num.add(&other.num), self.den.clone())
        } else if let Some(t) = other.den.try_div_exact(&self.den) {
            (self.num.mul(&t).add(&other.num), other.den.clone())
        } else if let Some(t) = self.den.try_div_exact(&other.den) {
            (self.num.add(&other.num.mul(&t)), self.den.clone())
        } else {
            (
                self.num
                    .mul(&other.den)
                    .add(&other.num.mul(&self.den)),
                self.den.mul(&other.den),
            )
        };
        let mut f = RatFunc { num, den };
        f.normalize();
        f
    }

    pub fn sub(&self, other: &Self) -> Self {
        self.add(&other.neg())
    }

    pub fn neg(&self) -> Self {
        RatFunc {
            num: self.num.neg(),
            den: self.den.clone(),
        }
    }

    pub fn mul(&self, other: &Self) -> Self {
        // diagonal cancellation, so products do not re-accumulate factors
        // the operands already share
        let (na, db) = match self.num.try_div_exact(&other.den) {
            Some(t) => (t, Poly::one()),
            None => (self.num.clone(), other.den.clone()),
        };
        let (nb, da) = match other.num.try_div_exact(&self.den) {
            Some(t) => (t, Poly::one()),
            None => (other.num.clone(), self.den.clone()),
        };
        let mut f = RatFunc {
            num: na.mul(&nb),
            den: da.mul(&db),
        };
        f.normalize();
        f
    }

    pub fn inv(&self) -> Result<Self> {
        if self.is_zero() {
            return Err(Error::DivisionByZero);
        }
        let mut f = RatFunc {
            num: self.den.clone(),
            den: self.num.clone(),
        };
        f.normalize();
        Ok(f)
    }

    pub fn div(&self, other: &Self) -> Result<Self> {
        Ok(self.mul(&other.inv()?))
    }

    /// Substitute rational values for a subset of the variables. Errors when
    /// the substituted denominator vanishes identically.
    pub fn substitute(&self, assign: &BTreeMap<Var, BigRational>) -> Result<Self> {
        let den = self.den.substitute(assign);
        if den.is_zero() {
            return Err(Error::DivisionByZero);
        }
        let mut f = RatFunc {
            num: self.num.substitute(assign),
            den,
        };
        f.normalize();
        Ok(f)
    }

    /// Full exact evaluation at rational points.
    pub fn eval_rational(&self, assign: &BTreeMap<Var, BigRational>) -> Result<BigRational> {
        let f = self.substitute(assign)?;
        match f.as_constant() {
            Some(c) => Ok(c),
            None => {
                let missing = f.num.vars().union(&f.den.vars()).next().cloned();
                Err(Error::MissingVariable(
                    missing.map(|v| v.to_string()).unwrap_or_default(),
                ))
            }
        }
    }
}

fn uni_var(a: &Poly, b: &Poly) -> Option<Var> {
    let mut vars = a.vars();
    vars.extend(b.vars());
    match vars.len() {
        0 => None,
        1 => vars.into_iter().next(),
        _ => None,
    }
}

impl PartialEq for RatFunc {
    fn eq(&self, other: &Self) -> bool {
        // Cross-multiplication avoids needing a canonical form.
        self.num.mul(&other.den) == other.num.mul(&self.den)
    }
}

impl std::ops::Add<&RatFunc> for RatFunc {
    type Output = RatFunc;
    fn add(self, o: &RatFunc) -> RatFunc {
        RatFunc::add(&self, o)
    }
}

impl std::ops::Sub<&RatFunc> for RatFunc {
    type Output = RatFunc;
    fn sub(self, o: &RatFunc) -> RatFunc {
        RatFunc::sub(&self, o)
    }
}

impl std::ops::Mul<&RatFunc> for RatFunc {
    type Output = RatFunc;
    fn mul(self, o: &RatFunc) -> RatFunc {
        RatFunc::mul(&self, o)
    }
}

impl std::ops::Neg for RatFunc {
    type Output = RatFunc;
    fn neg(self) -> RatFunc {
        RatFunc::neg(&self)
    }
}

impl fmt::Display for RatFunc {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let mut c = self.clone();
        c.reduce();
        if c.den.is_one() {
            write!(f, "{}", c.num)
        } else {
            write!(f, "({})/({})", c.num, c.den)
        }
    }
}

// ---- univariate gcd over Q[x], via a primitive pseudo-remainder sequence ----

fn clear_denominators(a: &[BigRational]) -> Vec<BigInt> {
    let mut lcm = BigInt::one();
    for c in a {
        lcm = lcm.lcm(c.denom());
    }
    let mut out: Vec<BigInt> = a
        .iter()
        .map(|c| c.numer() * (&lcm / c.denom()))
        .collect();
    let mut content = BigInt::zero();
    for c in &out {
        content = content.gcd(c);
    }
    if !content.is_zero() && !content.is_one() {
        for c in &mut out {
            *c /= &content;
        }
    }
    out
}

fn trim(mut a: Vec<BigInt>) -> Vec<BigInt> {
    while a.last().map(|c| c.is_zero()).unwrap_or(false) {
        a.pop();
    }
    a
}

fn pseudo_rem(mut a: Vec<BigInt>, b: &[BigInt]) -> Vec<BigInt> {
    let db = b.len() - 1;
    let lcb = b.last().unwrap().clone();
    while a.len() > db {
        let da = a.len() - 1;
        let lca = a.last().unwrap().clone();
        for c in a.iter_mut() {
            *c *= &lcb;
        }
        for (k, bc) in b.iter().enumerate() {
            a[da - db + k] -= &lca * bc;
        }
        a = trim(a);
        if a.is_empty() {
            break;
        }
    }
    a
}

fn primitive_part(mut a: Vec<BigInt>) -> Vec<BigInt> {
    let mut content = BigInt::zero();
    for c in &a {
        content = content.gcd(c);
    }
    if !content.is_zero() && !content.is_one() {
        for c in &mut a {
            *c /= &content;
        }
    }
    a
}

/// Monic gcd of two dense rational polynomials (low degree first).
fn univar_gcd(a: &[BigRational], b: &[BigRational]) -> Vec<BigRational> {
    let mut x = trim_q(a.to_vec());
    let mut y = trim_q(b.to_vec());
    if x.is_empty() {
        return monic(y);
    }
    if y.is_empty() {
        return monic(x);
    }
    let mut p = clear_denominators(&x);
    let mut q = clear_denominators(&y);
    if p.len() < q.len() {
        std::mem::swap(&mut p, &mut q);
    }
    loop {
        let r = primitive_part(pseudo_rem(p.clone(), &q));
        if r.is_empty() {
            x = q.iter().map(|c| BigRational::from_integer(c.clone())).collect();
            break;
        }
        if r.len() == 1 {
            y = vec![BigRational::one()];
            x = y;
            break;
        }
        p = q;
        q = r;
    }
    monic(x)
}

fn trim_q(mut a: Vec<BigRational>) -> Vec<BigRational> {
    while a.last().map(|c| c.is_zero()).unwrap_or(false) {
        a.pop();
    }
    a
}

fn monic(mut a: Vec<BigRational>) -> Vec<BigRational> {
    if let Some(lead) = a.last().cloned() {
        if !lead.is_one() {
            for c in &mut a {
                *c /= &lead;
            }
        }
    }
    a
}

/// Exact division of dense rational polynomials; panics on nonzero remainder
/// (only called with a known divisor).
fn univar_div_exact(a: &[BigRational], b: &[BigRational]) -> Vec<BigRational> {
    let mut rem = trim_q(a.to_vec());
    let db = b.len() - 1;
    let lcb = b.last().unwrap().clone();
    let mut quot = vec![BigRational::zero(); rem.len().saturating_sub(db)];
    while rem.len() > db {
        let da = rem.len() - 1;
        let c = rem.last().unwrap() / &lcb;
        quot[da - db] = c.clone();
        for (k, bc) in b.iter().enumerate() {
            let t = &c * bc;
            rem[da - db + k] -= t;
        }
        rem = trim_q(rem);
    }
    assert!(rem.is_empty(), "univar_div_exact: nonzero remainder");
    quot
}

#[cfg(test)]
mod tests {
    use super::*;

    fn q() -> RatFunc {
        RatFunc::var(Var::Q)
    }

    fn one() -> RatFunc {
        RatFunc::one()
    }

    #[test]
    fn same_expression_different_routes_compare_equal() {
        // (1 - q^2)/(1 - q) == 1 + q
        let num = one().sub(&q().mul(&q()));
        let den = one().sub(&q());
        let a = num.div(&den).unwrap();
        let b = one().add(&q());
        assert_eq!(a, b);
    }

    #[test]
    fn univariate_gcd_cancels() {
        let mut a = one().sub(&q().mul(&q()));
        let den = one().sub(&q());
        a = a.div(&den).unwrap();
        a.reduce();
        assert!(a.den().is_one());
        assert_eq!(a, one().add(&q()));
    }

    #[test]
    fn monomial_cancellation() {
        // (L0^2 - q L0^2)/(L0) -> L0(1-q) after monomial content removal
        let l0 = RatFunc::var(Var::LambdaK(0));
        let f = l0
            .mul(&l0)
            .mul(&one().sub(&q()))
            .div(&l0)
            .unwrap();
        assert_eq!(f, l0.mul(&one().sub(&q())));
    }

    #[test]
    fn nested_denominators_do_not_multiply_up() {
        // 1/(ab) + 1/a = (1 + b)/(ab) with a = 1 - q L0, b = 1 - q^2 L1
        let a = one().sub(&q().mul(&RatFunc::var(Var::LambdaK(0))));
        let b = one().sub(&q().mul(&q()).mul(&RatFunc::var(Var::LambdaK(1))));
        let f = one().div(&a.mul(&b)).unwrap().add(&one().div(&a).unwrap());
        let g = one().add(&b).div(&a.mul(&b)).unwrap();
        assert_eq!(f.den().num_terms(), g.den().num_terms());
        assert_eq!(f, g);
    }

    #[test]
    fn products_cancel_across_the_diagonal() {
        // (ab/c) * (c/a) = b exactly, with no leftover denominator
        let a = one().sub(&q());
        let b = one().add(&RatFunc::var(Var::LambdaK(0)));
        let c = one().add(&q().mul(&q()));
        let f = a.mul(&b).div(&c).unwrap().mul(&c.div(&a).unwrap());
        assert!(f.den().is_one());
        assert_eq!(f, b);
    }

    #[test]
    fn substitution_detects_vanishing_denominator() {
        // 1/(1 - L0) at L0 = 1
        let l0 = RatFunc::var(Var::LambdaK(0));
        let f = one().div(&one().sub(&l0)).unwrap();
        let mut assign = BTreeMap::new();
        assign.insert(Var::LambdaK(0), BigRational::one());
        assert!(f.substitute(&assign).is_err());
    }

    #[test]
    fn eval_rational_simplifies() {
        // (1-q)/(1-q^2) at q = 1/2 -> 2/3
        let f = one()
            .sub(&q())
            .div(&one().sub(&q().mul(&q())))
            .unwrap();
        let mut assign = BTreeMap::new();
        assign.insert(Var::Q, BigRational::new(1.into(), 2.into()));
        assert_eq!(
            f.eval_rational(&assign).unwrap(),
            BigRational::new(2.into(), 3.into())
        );
    }
}
