//! Truncated (Laurent) series in the variable Q over any scalar field, the
//! q-shift sigma: Q -> qQ, the finite difference delta_q = (sigma-Id)/(q-1),
//! and polynomials in a log symbol L with series coefficients.

use crate::error::{Error, Result};
use crate::scalar::Scalar;

/// Series known exactly for all degrees <= `trunc`; degrees above `trunc`
/// are unknown, not zero. `coeffs[k]` is the coefficient of Q^(low+k).
#[derive(Clone, Debug)]
pub struct TruncSeries<S> {
    low: i64,
    coeffs: Vec<S>,
    trunc: i64,
    proto: S,
}

impl<S: Scalar> TruncSeries<S> {
    pub fn zero(proto: &S, trunc: i64) -> Self {
        TruncSeries {
            low: 0,
            coeffs: Vec::new(),
            trunc,
            proto: proto.zero_like(),
        }
    }

    pub fn constant(c: S, trunc: i64) -> Self {
        Self::monomial(0, c, trunc)
    }

    pub fn one(proto: &S, trunc: i64) -> Self {
        Self::constant(proto.one_like(), trunc)
    }

    pub fn monomial(degree: i64, c: S, trunc: i64) -> Self {
        let proto = c.zero_like();
        let coeffs = if degree <= trunc && !c.is_zero() {
            vec![c]
        } else {
            Vec::new()
        };
        TruncSeries {
            low: degree,
            coeffs,
            trunc,
            proto,
        }
    }

    pub fn from_coeffs(low: i64, coeffs: Vec<S>, trunc: i64, proto: &S) -> Self {
        let mut s = TruncSeries {
            low,
            coeffs,
            trunc,
            proto: proto.zero_like(),
        };
        let max_len = (trunc - low + 1).max(0) as usize;
        s.coeffs.truncate(max_len);
        s
    }

    pub fn trunc(&self) -> i64 {
        self.trunc
    }

    pub fn low_stored(&self) -> i64 {
        self.low
    }

    pub fn proto(&self) -> &S {
        &self.proto
    }

    /// Coefficient of Q^d. Panics when d exceeds the truncation order, since
    /// that coefficient is unknown rather than zero.
    pub fn coeff(&self, d: i64) -> S {
        assert!(d <= self.trunc, "coefficient of Q^{d} is beyond the truncation order");
        let idx = d - self.low;
        if idx < 0 || idx as usize >= self.coeffs.len() {
            self.proto.zero_like()
        } else {
            self.coeffs[idx as usize].clone()
        }
    }

    /// Stored (degree, coefficient) pairs.
    pub fn iter(&self) -> impl Iterator<Item = (i64, &S)> {
        self.coeffs.iter().enumerate().map(move |(k, c)| (self.low + k as i64, c))
    }

    pub fn is_zero(&self) -> bool {
        self.coeffs.iter().all(|c| c.is_zero())
    }

    pub fn same_field(&self, other: &Self) -> bool {
        self.proto.same_field(&other.proto)
    }

    pub fn truncate(&self, new_trunc: i64) -> Self {
        Self::from_coeffs(self.low, self.coeffs.clone(), self.trunc.min(new_trunc), &self.proto)
    }

    pub fn map<F: FnMut(i64, &S) -> S>(&self, mut f: F) -> Self {
        let coeffs = self
            .coeffs
            .iter()
            .enumerate()
            .map(|(k, c)| f(self.low + k as i64, c))
            .collect();
        TruncSeries {
            low: self.low,
            coeffs,
            trunc: self.trunc,
            proto: self.proto.zero_like(),
        }
    }

    pub fn add(&self, other: &Self) -> Self {
        let trunc = self.trunc.min(other.trunc);
        let low = self.low.min(other.low);
        let high = ((self.low + self.coeffs.len() as i64 - 1).max(other.low + other.coeffs.len() as i64 - 1)).min(trunc);
        let mut coeffs = Vec::new();
        if high >= low {
            coeffs.reserve((high - low + 1) as usize);
            for d in low..=high {
                let a = self.coeff_in_range(d);
                let b = other.coeff_in_range(d);
                coeffs.push(a + &b);
            }
        }
        TruncSeries {
            low,
            coeffs,
            trunc,
            proto: self.proto.zero_like(),
        }
    }

    fn coeff_in_range(&self, d: i64) -> S {
        let idx = d - self.low;
        if idx < 0 || idx as usize >= self.coeffs.len() {
            self.proto.zero_like()
        } else {
            self.coeffs[idx as usize].clone()
        }
    }

    pub fn neg(&self) -> Self {
        self.map(|_, c| -c.clone())
    }

    pub fn sub(&self, other: &Self) -> Self {
        self.add(&other.neg())
    }

    pub fn mul(&self, other: &Self) -> Self {
        let trunc = (self.trunc + other.low).min(other.trunc + self.low);
        let low = self.low + other.low;
        let len = ((trunc - low + 1).max(0)) as usize;
        let mut coeffs = vec![self.proto.zero_like(); len];
        for (da, a) in self.iter() {
            if a.is_zero() {
                continue;
            }
            for (db, b) in other.iter() {
                let d = da + db;
                if d > trunc {
                    break;
                }
                let idx = (d - low) as usize;
                coeffs[idx] = coeffs[idx].clone() + &(a.clone() * b);
            }
        }
        TruncSeries {
            low,
            coeffs,
            trunc,
            proto: self.proto.zero_like(),
        }
    }

    pub fn mul_scalar(&self, c: &S) -> Self {
        if c.is_zero() && S::EXACT {
            return Self::zero(&self.proto, self.trunc);
        }
        self.map(|_, a| a.clone() * c)
    }

    /// Multiply by Q^k.
    pub fn shift_degree(&self, k: i64) -> Self {
        TruncSeries {
            low: self.low + k,
            coeffs: self.coeffs.clone(),
            trunc: self.trunc + k,
            proto: self.proto.zero_like(),
        }
    }

    /// Multiplicative inverse up to the derivable truncation order.
    pub fn invert(&self) -> Result<Self> {
        let first = self.coeffs.iter().position(|c| !c.is_zero());
        let v = match first {
            Some(v) => v,
            None => return Err(Error::NonUnitLeadingCoefficient),
        };
        let low_eff = self.low + v as i64;
        let unit = &self.coeffs[v];
        let uinv = unit.inv().map_err(|_| Error::NonUnitLeadingCoefficient)?;
        let out_trunc = self.trunc - 2 * low_eff;
        let out_low = -low_eff;
        let len = ((out_trunc - out_low + 1).max(0)) as usize;
        let mut b: Vec<S> = Vec::with_capacity(len);
        if len > 0 {
            b.push(uinv.clone());
        }
        for k in 1..len {
            // b_k = -u^{-1} * sum_{j=1..k} a_{low_eff+j} b_{k-j}
            let mut acc = self.proto.zero_like();
            for j in 1..=k {
                let a = self.coeff_in_range(low_eff + j as i64);
                if a.is_zero() {
                    continue;
                }
                acc = acc + &(a * &b[k - j]);
            }
            b.push(-(uinv.clone() * &acc));
        }
        Ok(TruncSeries {
            low: out_low,
            coeffs: b,
            trunc: out_trunc,
            proto: self.proto.zero_like(),
        })
    }

    /// sigma: coefficient of Q^d picks up q^d.
    pub fn sigma_shift(&self, q: &S) -> Self {
        self.map(|d, c| {
            c.clone() * &q.pow_i64(d).expect("q must be invertible for Laurent shifts")
        })
    }

    /// delta_q = (sigma - Id)/(q-1): coefficient of Q^d scales by
    /// (q^d - 1)/(q - 1).
    pub fn delta_q(&self, q: &S) -> Result<Self> {
        let qm1 = q.clone() - &q.one_like();
        if qm1.is_zero() {
            return Err(Error::QEqualsOne);
        }
        let inv = qm1.inv()?;
        Ok(self.map(|d, c| {
            let factor = (q.pow_i64(d).expect("q invertible") - &q.one_like()) * &inv;
            c.clone() * &factor
        }))
    }

    /// Twisted difference (m*sigma - Id)/(q-1) for a column carrying a
    /// sigma-eigenprefactor with multiplier m.
    pub fn delta_q_twisted(&self, q: &S, mult: &S) -> Result<Self> {
        let qm1 = q.clone() - &q.one_like();
        if qm1.is_zero() {
            return Err(Error::QEqualsOne);
        }
        let inv = qm1.inv()?;
        Ok(self.map(|d, c| {
            let factor = (mult.clone() * &q.pow_i64(d).expect("q invertible") - &q.one_like()) * &inv;
            c.clone() * &factor
        }))
    }

    /// Q -> cQ: coefficient of Q^d scales by c^d.
    pub fn scale_q(&self, c: &S) -> Self {
        self.map(|d, a| {
            a.clone() * &c.pow_i64(d).expect("scale must be invertible for Laurent series")
        })
    }

    /// The Euler operator theta = Q d/dQ: coefficient of Q^d scales by d.
    pub fn euler(&self) -> Self {
        self.map(|d, c| c.clone() * &self.proto.from_i64(d))
    }

    /// Largest |coefficient| expressed through a caller-supplied absolute
    /// value; used for residual reports.
    pub fn max_by<F: FnMut(&S) -> f64>(&self, mut absf: F) -> f64 {
        self.coeffs.iter().map(|c| absf(c)).fold(0.0, f64::max)
    }
}

impl<S: Scalar> PartialEq for TruncSeries<S> {
    fn eq(&self, other: &Self) -> bool {
        if self.trunc != other.trunc {
            return false;
        }
        let low = self.low.min(other.low);
        for d in low..=self.trunc {
            if self.coeff_in_range(d) != other.coeff_in_range(d) {
                return false;
            }
        }
        true
    }
}

/// Checked addition; the spec-level entry point.
pub fn series_add<S: Scalar>(a: &TruncSeries<S>, b: &TruncSeries<S>) -> Result<TruncSeries<S>> {
    if !a.same_field(b) {
        return Err(Error::FieldMismatch("series_add operands".into()));
    }
    Ok(a.add(b))
}

/// Checked convolution; the spec-level entry point.
pub fn series_mul<S: Scalar>(a: &TruncSeries<S>, b: &TruncSeries<S>) -> Result<TruncSeries<S>> {
    if !a.same_field(b) {
        return Err(Error::FieldMismatch("series_mul operands".into()));
    }
    Ok(a.mul(b))
}

pub fn series_invert<S: Scalar>(a: &TruncSeries<S>) -> Result<TruncSeries<S>> {
    a.invert()
}

/// Polynomial in a formal log symbol L with truncated-series coefficients.
/// `terms[a]` is the series multiplying L^a. Under sigma the symbol obeys
/// L -> L + 1; after confluence the same container holds powers of log Q.
#[derive(Clone, Debug)]
pub struct LogPoly<S> {
    terms: Vec<TruncSeries<S>>,
}

impl<S: Scalar> PartialEq for LogPoly<S> {
    fn eq(&self, other: &Self) -> bool {
        let n = self.terms.len().max(other.terms.len());
        for a in 0..n {
            match (self.terms.get(a), other.terms.get(a)) {
                (Some(x), Some(y)) => {
                    if x != y {
                        return false;
                    }
                }
                (Some(x), None) => {
                    if !x.is_zero() {
                        return false;
                    }
                }
                (None, Some(y)) => {
                    if !y.is_zero() {
                        return false;
                    }
                }
                (None, None) => unreachable!(),
            }
        }
        true
    }
}

impl<S: Scalar> LogPoly<S> {
    pub fn zero(proto: &S, trunc: i64) -> Self {
        LogPoly {
            terms: vec![TruncSeries::zero(proto, trunc)],
        }
    }

    pub fn from_series(s: TruncSeries<S>) -> Self {
        LogPoly { terms: vec![s] }
    }

    /// c * L^a as a log-polynomial.
    pub fn l_pow(a: usize, s: TruncSeries<S>) -> Self {
        let proto = s.proto().clone();
        let trunc = s.trunc();
        let mut terms = vec![TruncSeries::zero(&proto, trunc); a];
        terms.push(s);
        LogPoly { terms }
    }

    pub fn from_terms(terms: Vec<TruncSeries<S>>) -> Self {
        assert!(!terms.is_empty(), "LogPoly needs at least one term");
        LogPoly { terms }
    }

    pub fn log_degree(&self) -> usize {
        self.terms.len() - 1
    }

    pub fn term(&self, a: usize) -> Option<&TruncSeries<S>> {
        self.terms.get(a)
    }

    pub fn terms(&self) -> &[TruncSeries<S>] {
        &self.terms
    }

    pub fn trunc(&self) -> i64 {
        self.terms.iter().map(|t| t.trunc()).min().unwrap()
    }

    pub fn is_zero(&self) -> bool {
        self.terms.iter().all(|t| t.is_zero())
    }

    fn proto(&self) -> &S {
        self.terms[0].proto()
    }

    /// Drop trailing zero series (keeps at least one term).
    pub fn trim(&self) -> Self {
        let mut n = self.terms.len();
        while n > 1 && self.terms[n - 1].is_zero() {
            n -= 1;
        }
        LogPoly {
            terms: self.terms[..n].to_vec(),
        }
    }

    pub fn add(&self, other: &Self) -> Self {
        let n = self.terms.len().max(other.terms.len());
        let trunc = self.trunc().min(other.trunc());
        let proto = self.proto();
        let mut terms = Vec::with_capacity(n);
        for a in 0..n {
            let zero = TruncSeries::zero(proto, trunc);
            let x = self.terms.get(a).unwrap_or(&zero);
            let y = other.terms.get(a).unwrap_or(&zero);
            terms.push(x.add(y));
        }
        LogPoly { terms }
    }

    pub fn neg(&self) -> Self {
        LogPoly {
            terms: self.terms.iter().map(|t| t.neg()).collect(),
        }
    }

    pub fn sub(&self, other: &Self) -> Self {
        self.add(&other.neg())
    }

    pub fn mul(&self, other: &Self) -> Self {
        let n = self.terms.len() + other.terms.len() - 1;
        let trunc = self.trunc().min(other.trunc());
        let mut terms = vec![TruncSeries::zero(self.proto(), trunc); n];
        for (a, x) in self.terms.iter().enumerate() {
            if x.is_zero() {
                continue;
            }
            for (b, y) in other.terms.iter().enumerate() {
                terms[a + b] = terms[a + b].add(&x.mul(y));
            }
        }
        LogPoly { terms }
    }

    pub fn mul_series(&self, s: &TruncSeries<S>) -> Self {
        LogPoly {
            terms: self.terms.iter().map(|t| t.mul(s)).collect(),
        }
    }

    pub fn mul_scalar(&self, c: &S) -> Self {
        LogPoly {
            terms: self.terms.iter().map(|t| t.mul_scalar(c)).collect(),
        }
    }

    pub fn map_series<F: FnMut(&TruncSeries<S>) -> TruncSeries<S>>(&self, mut f: F) -> Self {
        LogPoly {
            terms: self.terms.iter().map(|t| f(t)).collect(),
        }
    }

    /// sigma on the full object: L -> L + 1 re-expanded binomially, and the
    /// q-shift applied to every series coefficient.
    pub fn sigma(&self, q: &S) -> Self {
        let n = self.terms.len();
        let trunc = self.trunc();
        let proto = self.proto();
        let mut terms = vec![TruncSeries::zero(proto, trunc); n];
        for (b, t) in self.terms.iter().enumerate() {
            let shifted = t.sigma_shift(q);
            // (L+1)^b = sum_a C(b,a) L^a
            let mut binom: i64 = 1;
            for a in 0..=b {
                if a > 0 {
                    binom = binom * (b - a + 1) as i64 / a as i64;
                }
                let c = proto.from_i64(binom);
                terms[a] = terms[a].add(&shifted.mul_scalar(&c));
            }
        }
        LogPoly { terms }
    }

    /// delta_q = (sigma - Id)/(q - 1) on the full object.
    pub fn delta(&self, q: &S) -> Result<Self> {
        let qm1 = q.clone() - &q.one_like();
        if qm1.is_zero() {
            return Err(Error::QEqualsOne);
        }
        let inv = qm1.inv()?;
        Ok(self.sigma(q).sub(self).mul_scalar(&inv))
    }

    /// theta = Q d/dQ with the symbol read as log Q: theta(L^a s) =
    /// a L^(a-1) s + L^a theta(s).
    pub fn euler_log(&self) -> Self {
        let n = self.terms.len();
        let mut terms = Vec::with_capacity(n);
        for a in 0..n {
            let mut t = self.terms[a].euler();
            if a + 1 < n {
                let c = self.proto().from_i64((a + 1) as i64);
                t = t.add(&self.terms[a + 1].mul_scalar(&c));
            }
            terms.push(t);
        }
        LogPoly { terms }
    }

    pub fn scale_q(&self, c: &S) -> Self {
        self.map_series(|t| t.scale_q(c))
    }

    pub fn max_by<F: FnMut(&S) -> f64 + Copy>(&self, absf: F) -> f64 {
        self.terms.iter().map(|t| t.max_by(absf)).fold(0.0, f64::max)
    }
}

/// sigma with the spec's name.
pub fn logpoly_sigma<S: Scalar>(a: &LogPoly<S>, q: &S) -> LogPoly<S> {
    a.sigma(q)
}

/// delta_q with the spec's name.
pub fn logpoly_delta<S: Scalar>(a: &LogPoly<S>, q: &S) -> Result<LogPoly<S>> {
    a.delta(q)
}
