//! Sparse multivariate polynomials over the rationals, ordered by graded lex.

use std::cmp::Ordering;
use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use num_bigint::BigInt;
use num_integer::Integer;
use num_rational::BigRational;
use num_traits::{One, Signed, Zero};

/// The indeterminates a coefficient may contain. `Q` is the shift parameter q
/// (lowercase in the mathematics); the series variable lives in `TruncSeries`
/// and is never a `Var`.
#[derive(Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Debug)]
pub enum Var {
    /// shift parameter q
    Q,
    /// differential-side scaling z
    Z,
    /// multiplicative equivariant parameter Lambda_i (K-theory side)
    LambdaK(u32),
    /// additive equivariant parameter lambda_i (cohomology side)
    LambdaH(u32),
}

impl fmt::Display for Var {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Var::Q => write!(f, "q"),
            Var::Z => write!(f, "z"),
            Var::LambdaK(i) => write!(f, "L{i}"),
            Var::LambdaH(i) => write!(f, "l{i}"),
        }
    }
}

/// A power product, stored as a sorted list of (variable, positive exponent).
#[derive(Clone, PartialEq, Eq, Hash, Debug, Default)]
pub struct Monomial(Vec<(Var, u32)>);

impl Monomial {
    pub fn one() -> Self {
        Monomial(Vec::new())
    }

    pub fn var(v: Var) -> Self {
        Monomial(vec![(v, 1)])
    }

    pub fn var_pow(v: Var, e: u32) -> Self {
        if e == 0 {
            Monomial::one()
        } else {
            Monomial(vec![(v, e)])
        }
    }

    pub fn is_one(&self) -> bool {
        self.0.is_empty()
    }

    pub fn total_degree(&self) -> u64 {
        self.0.iter().map(|&(_, e)| e as u64).sum()
    }

    pub fn exponent(&self, v: Var) -> u32 {
        self.0
            .iter()
            .find(|&&(w, _)| w == v)
            .map(|&(_, e)| e)
            .unwrap_or(0)
    }

    pub fn vars(&self) -> impl Iterator<Item = Var> + '_ {
        self.0.iter().map(|&(v, _)| v)
    }

    pub fn mul(&self, other: &Self) -> Self {
        let mut out = Vec::with_capacity(self.0.len() + other.0.len());
        let (mut i, mut j) = (0, 0);
        while i < self.0.len() || j < other.0.len() {
            match (self.0.get(i), other.0.get(j)) {
                (Some(&(va, ea)), Some(&(vb, eb))) => match va.cmp(&vb) {
                    Ordering::Less => {
                        out.push((va, ea));
                        i += 1;
                    }
                    Ordering::Greater => {
                        out.push((vb, eb));
                        j += 1;
                    }
                    Ordering::Equal => {
                        out.push((va, ea + eb));
                        i += 1;
                        j += 1;
                    }
                },
                (Some(&t), None) => {
                    out.push(t);
                    i += 1;
                }
                (None, Some(&t)) => {
                    out.push(t);
                    j += 1;
                }
                (None, None) => unreachable!(),
            }
        }
        Monomial(out)
    }

    /// Componentwise quotient; `None` when some exponent would go negative.
    pub fn try_div(&self, other: &Self) -> Option<Self> {
        let mut out = Vec::with_capacity(self.0.len());
        let mut i = 0;
        for &(vb, eb) in &other.0 {
            while i < self.0.len() && self.0[i].0 < vb {
                out.push(self.0[i]);
                i += 1;
            }
            if i >= self.0.len() || self.0[i].0 != vb || self.0[i].1 < eb {
                return None;
            }
            if self.0[i].1 > eb {
                out.push((vb, self.0[i].1 - eb));
            }
            i += 1;
        }
        out.extend_from_slice(&self.0[i..]);
        Some(Monomial(out))
    }

    /// Componentwise minimum.
    pub fn gcd(&self, other: &Self) -> Self {
        let mut out = Vec::new();
        for &(va, ea) in &self.0 {
            let eb = other.exponent(va);
            let e = ea.min(eb);
            if e > 0 {
                out.push((va, e));
            }
        }
        Monomial(out)
    }
}

// Graded lexicographic: total degree first, then lex with earlier variables
// weighing more.
impl Ord for Monomial {
    fn cmp(&self, other: &Self) -> Ordering {
        let (da, db) = (self.total_degree(), other.total_degree());
        if da != db {
            return da.cmp(&db);
        }
        let (mut i, mut j) = (0, 0);
        loop {
            match (self.0.get(i), other.0.get(j)) {
                (None, None) => return Ordering::Equal,
                (Some(_), None) => return Ordering::Greater,
                (None, Some(_)) => return Ordering::Less,
                (Some(&(va, ea)), Some(&(vb, eb))) => {
                    match va.cmp(&vb) {
                        Ordering::Less => return Ordering::Greater,
                        Ordering::Greater => return Ordering::Less,
                        Ordering::Equal => {}
                    }
                    if ea != eb {
                        return ea.cmp(&eb);
                    }
                    i += 1;
                    j += 1;
                }
            }
        }
    }
}

impl PartialOrd for Monomial {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl fmt::Display for Monomial {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.0.is_empty() {
            return write!(f, "1");
        }
        for (k, &(v, e)) in self.0.iter().enumerate() {
            if k > 0 {
                write!(f, "*")?;
            }
            if e == 1 {
                write!(f, "{v}")?;
            } else {
                write!(f, "{v}^{e}")?;
            }
        }
        Ok(())
    }
}

/// Sparse multivariate polynomial with `BigRational` coefficients.
/// Zero coefficients are never stored.
#[derive(Clone, PartialEq, Eq, Debug, Default)]
pub struct Poly {
    terms: BTreeMap<Monomial, BigRational>,
}

impl Poly {
    pub fn zero() -> Self {
        Poly {
            terms: BTreeMap::new(),
        }
    }

    pub fn one() -> Self {
        Poly::constant(BigRational::one())
    }

    pub fn constant(c: BigRational) -> Self {
        let mut terms = BTreeMap::new();
        if !c.is_zero() {
            terms.insert(Monomial::one(), c);
        }
        Poly { terms }
    }

    pub fn from_i64(n: i64) -> Self {
        Poly::constant(BigRational::from_integer(n.into()))
    }

    pub fn var(v: Var) -> Self {
        Poly::monomial(Monomial::var(v), BigRational::one())
    }

    pub fn var_pow(v: Var, e: u32) -> Self {
        Poly::monomial(Monomial::var_pow(v, e), BigRational::one())
    }

    pub fn monomial(m: Monomial, c: BigRational) -> Self {
        let mut terms = BTreeMap::new();
        if !c.is_zero() {
            terms.insert(m, c);
        }
        Poly { terms }
    }

    pub fn is_zero(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn is_one(&self) -> bool {
        self.terms.len() == 1
            && self
                .terms
                .get(&Monomial::one())
                .map(|c| c.is_one())
                .unwrap_or(false)
    }

    /// The constant-polynomial value, if this polynomial is constant.
    pub fn as_constant(&self) -> Option<BigRational> {
        if self.terms.is_empty() {
            return Some(BigRational::zero());
        }
        if self.terms.len() == 1 {
            if let Some(c) = self.terms.get(&Monomial::one()) {
                return Some(c.clone());
            }
        }
        None
    }

    pub fn num_terms(&self) -> usize {
        self.terms.len()
    }

    pub fn terms(&self) -> impl Iterator<Item = (&Monomial, &BigRational)> {
        self.terms.iter()
    }

    pub fn total_degree(&self) -> u64 {
        self.terms
            .keys()
            .map(|m| m.total_degree())
            .max()
            .unwrap_or(0)
    }

    pub fn degree_in(&self, v: Var) -> u32 {
        self.terms
            .keys()
            .map(|m| m.exponent(v))
            .max()
            .unwrap_or(0)
    }

    pub fn vars(&self) -> BTreeSet<Var> {
        self.terms.keys().flat_map(|m| m.vars()).collect()
    }

    /// Leading term under graded lex.
    pub fn leading(&self) -> Option<(&Monomial, &BigRational)> {
        self.terms.iter().next_back()
    }

    fn insert_add(terms: &mut BTreeMap<Monomial, BigRational>, m: Monomial, c: BigRational) {
        if c.is_zero() {
            return;
        }
        match terms.entry(m) {
            std::collections::btree_map::Entry::Vacant(e) => {
                e.insert(c);
            }
            std::collections::btree_map::Entry::Occupied(mut e) => {
                let sum = e.get() + c;
                if sum.is_zero() {
                    e.remove();
                } else {
                    *e.get_mut() = sum;
                }
            }
        }
    }

    pub fn add(&self, other: &Self) -> Self {
        let mut terms = self.terms.clone();
        for (m, c) in &other.terms {
            Self::insert_add(&mut terms, m.clone(), c.clone());
        }
        Poly { terms }
    }

    pub fn neg(&self) -> Self {
        Poly {
            terms: self.terms.iter().map(|(m, c)| (m.clone(), -c)).collect(),
        }
    }

    pub fn sub(&self, other: &Self) -> Self {
        let mut terms = self.terms.clone();
        for (m, c) in &other.terms {
            Self::insert_add(&mut terms, m.clone(), -c);
        }
        Poly { terms }
    }

    pub fn mul(&self, other: &Self) -> Self {
        let mut terms = BTreeMap::new();
        for (ma, ca) in &self.terms {
            for (mb, cb) in &other.terms {
                Self::insert_add(&mut terms, ma.mul(mb), ca * cb);
            }
        }
        Poly { terms }
    }

    pub fn mul_scalar(&self, c: &BigRational) -> Self {
        if c.is_zero() {
            return Poly::zero();
        }
        Poly {
            terms: self
                .terms
                .iter()
                .map(|(m, a)| (m.clone(), a * c))
                .collect(),
        }
    }

    pub fn mul_monomial(&self, m: &Monomial) -> Self {
        Poly {
            terms: self
                .terms
                .iter()
                .map(|(ma, c)| (ma.mul(m), c.clone()))
                .collect(),
        }
    }

    pub fn pow(&self, mut e: u32) -> Self {
        let mut base = self.clone();
        let mut acc = Poly::one();
        while e > 0 {
            if e & 1 == 1 {
                acc = acc.mul(&base);
            }
            e >>= 1;
            if e > 0 {
                base = base.mul(&base);
            }
        }
        acc
    }

    /// Greatest monomial dividing every term (componentwise minimum).
    pub fn monomial_content(&self) -> Monomial {
        let mut it = self.terms.keys();
        let first = match it.next() {
            Some(m) => m.clone(),
            None => return Monomial::one(),
        };
        it.fold(first, |acc, m| acc.gcd(m))
    }

    pub fn div_monomial(&self, m: &Monomial) -> Self {
        if m.is_one() {
            return self.clone();
        }
        Poly {
            terms: self
                .terms
                .iter()
                .map(|(ma, c)| {
                    (
                        ma.try_div(m).expect("monomial does not divide every term"),
                        c.clone(),
                    )
                })
                .collect(),
        }
    }

    /// Exact quotient self / b by leading-term elimination under grlex;
    /// `None` when b does not divide self. An exact quotient forces every
    /// intermediate leading term to be divisible, so the first failure is
    /// decisive. A step cap turns pathological sparse cases into `None`
    /// rather than long walks; callers treat that as "not divisible".
    pub fn try_div_exact(&self, b: &Poly) -> Option<Poly> {
        let (bm, bc) = b.leading()?;
        let (bm, bc) = (bm.clone(), bc.clone());
        if self.is_zero() {
            return Some(Poly::zero());
        }
        let mut rem = self.clone();
        let mut quot = BTreeMap::new();
        let mut steps = 0usize;
        while let Some((rm, rc)) = rem.leading() {
            steps += 1;
            if steps > 10_000 {
                return None;
            }
            let m = rm.try_div(&bm)?;
            let c = rc / &bc;
            rem = rem.sub(&b.mul_monomial(&m).mul_scalar(&c));
            quot.insert(m, c);
        }
        Some(Poly { terms: quot })
    }

    /// gcd of the coefficients as a positive rational: gcd of numerators over
    /// lcm of denominators. Zero polynomial has content 0.
    pub fn content(&self) -> BigRational {
        let mut num_gcd = BigInt::zero();
        let mut den_lcm = BigInt::one();
        for c in self.terms.values() {
            num_gcd = num_gcd.gcd(&c.numer().abs());
            den_lcm = den_lcm.lcm(c.denom());
        }
        if num_gcd.is_zero() {
            BigRational::zero()
        } else {
            BigRational::new(num_gcd, den_lcm)
        }
    }

    /// Substitute rational values for a subset of the variables.
    pub fn substitute(&self, assign: &BTreeMap<Var, BigRational>) -> Poly {
        let mut out = BTreeMap::new();
        for (m, c) in &self.terms {
            let mut coeff = c.clone();
            let mut rest = Vec::new();
            for &(v, e) in &m.0 {
                match assign.get(&v) {
                    Some(val) => {
                        coeff *= num_traits::pow::pow(val.clone(), e as usize);
                    }
                    None => rest.push((v, e)),
                }
            }
            Self::insert_add(&mut out, Monomial(rest), coeff);
        }
        Poly { terms: out }
    }

    /// Replaces one variable by a polynomial.
    pub fn substitute_poly(&self, v: Var, g: &Poly) -> Poly {
        let mut out = Poly::zero();
        for (m, c) in &self.terms {
            let mut term = Poly::constant(c.clone());
            let mut gexp = 0u32;
            for &(w, e) in &m.0 {
                if w == v {
                    gexp = e;
                } else {
                    term = term.mul_monomial(&Monomial::var_pow(w, e));
                }
            }
            if gexp > 0 {
                term = term.mul(&g.pow(gexp));
            }
            out = out.add(&term);
        }
        out
    }

    /// Full evaluation at rational points; panics if a variable is unassigned.
    pub fn eval_rational(&self, assign: &BTreeMap<Var, BigRational>) -> BigRational {
        let p = self.substitute(assign);
        p.as_constant().expect("evaluation left free variables")
    }

    /// The polynomial as a dense coefficient vector in a single variable.
    /// `None` if a second variable occurs.
    pub fn univariate_in(&self, v: Var) -> Option<Vec<BigRational>> {
        let mut coeffs = vec![BigRational::zero(); self.degree_in(v) as usize + 1];
        for (m, c) in &self.terms {
            let e = m.exponent(v);
            if m.total_degree() != e as u64 {
                return None;
            }
            coeffs[e as usize] = c.clone();
        }
        Some(coeffs)
    }

    pub fn from_univariate(v: Var, coeffs: &[BigRational]) -> Poly {
        let mut terms = BTreeMap::new();
        for (e, c) in coeffs.iter().enumerate() {
            if !c.is_zero() {
                terms.insert(Monomial::var_pow(v, e as u32), c.clone());
            }
        }
        Poly { terms }
    }
}

impl fmt::Display for Poly {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.terms.is_empty() {
            return write!(f, "0");
        }
        // Descending graded-lex order for readability.
        for (k, (m, c)) in self.terms.iter().rev().enumerate() {
            let neg = c.is_negative();
            let abs = c.abs();
            if k == 0 {
                if neg {
                    write!(f, "-")?;
                }
            } else if neg {
                write!(f, " - ")?;
            } else {
                write!(f, " + ")?;
            }
            if m.is_one() {
                write!(f, "{abs}")?;
            } else if abs.is_one() {
                write!(f, "{m}")?;
            } else {
                write!(f, "{abs}*{m}")?;
            }
        }
        Ok(())
    }
}
