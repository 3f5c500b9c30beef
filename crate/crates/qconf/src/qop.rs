//! Scalar q-difference operators (sigma and delta bases), their differential
//! counterparts acting through theta = Q d/dQ, the annihilators of the
//! J-function series, basis rewrites, argument pullback, residual
//! application, companion matrices, and the numeric coefficientwise q -> 1
//! limit.

use num_traits::One;
use rug::Float;

use crate::error::{Error, Result};
use crate::jfun::{CohEqColumn, EqColumn};
use crate::linalg::Mat;
use crate::scalar::{principal_power, ComplexAP, Rational, Scalar};
use crate::series::{LogPoly, TruncSeries};

/// Dense polynomial in the series variable Q with coefficients in a scalar
/// field. Exact (no truncation); trailing zeros are trimmed.
#[derive(Debug, Clone)]
pub struct PolyQ<S: Scalar> {
    proto: S,
    c: Vec<S>,
}

impl<S: Scalar> PolyQ<S> {
    pub fn zero(proto: &S) -> Self {
        PolyQ {
            proto: proto.zero_like(),
            c: Vec::new(),
        }
    }

    pub fn constant(v: S) -> Self {
        let proto = v.zero_like();
        let mut p = PolyQ { proto, c: vec![v] };
        p.trim();
        p
    }

    pub fn monomial(proto: &S, j: usize, v: S) -> Self {
        let mut c = vec![proto.zero_like(); j + 1];
        c[j] = v;
        let mut p = PolyQ {
            proto: proto.zero_like(),
            c,
        };
        p.trim();
        p
    }

    pub fn from_coeffs(proto: &S, c: Vec<S>) -> Self {
        let mut p = PolyQ {
            proto: proto.zero_like(),
            c,
        };
        p.trim();
        p
    }

    fn trim(&mut self) {
        while let Some(last) = self.c.last() {
            if last.is_zero() {
                self.c.pop();
            } else {
                break;
            }
        }
    }

    pub fn proto(&self) -> &S {
        &self.proto
    }

    pub fn coeff(&self, j: usize) -> S {
        self.c.get(j).cloned().unwrap_or_else(|| self.proto.zero_like())
    }

    pub fn coeffs(&self) -> &[S] {
        &self.c
    }

    pub fn degree(&self) -> Option<usize> {
        if self.c.is_empty() {
            None
        } else {
            Some(self.c.len() - 1)
        }
    }

    pub fn is_zero(&self) -> bool {
        self.c.is_empty()
    }

    pub fn add(&self, other: &Self) -> Self {
        let len = self.c.len().max(other.c.len());
        let c = (0..len)
            .map(|j| self.coeff(j) + &other.coeff(j))
            .collect();
        PolyQ::from_coeffs(&self.proto, c)
    }

    pub fn neg(&self) -> Self {
        PolyQ {
            proto: self.proto.clone(),
            c: self.c.iter().map(|v| -v.clone()).collect(),
        }
    }

    pub fn sub(&self, other: &Self) -> Self {
        self.add(&other.neg())
    }

    pub fn mul(&self, other: &Self) -> Self {
        if self.is_zero() || other.is_zero() {
            return PolyQ::zero(&self.proto);
        }
        let mut c = vec![self.proto.zero_like(); self.c.len() + other.c.len() - 1];
        for (i, a) in self.c.iter().enumerate() {
            for (j, b) in other.c.iter().enumerate() {
                c[i + j] = c[i + j].clone() + &(a.clone() * b);
            }
        }
        PolyQ::from_coeffs(&self.proto, c)
    }

    pub fn mul_scalar(&self, v: &S) -> Self {
        PolyQ::from_coeffs(
            &self.proto,
            self.c.iter().map(|a| a.clone() * v).collect(),
        )
    }

    /// Substitutes Q -> f Q.
    pub fn scale_arg(&self, f: &S) -> Self {
        let mut fp = self.proto.one_like();
        let c = self
            .c
            .iter()
            .enumerate()
            .map(|(j, a)| {
                if j > 0 {
                    fp = fp.clone() * f;
                }
                a.clone() * &fp
            })
            .collect();
        PolyQ::from_coeffs(&self.proto, c)
    }

    pub fn eval(&self, x: &S) -> S {
        let mut v = self.proto.zero_like();
        for a in self.c.iter().rev() {
            v = v * x + a;
        }
        v
    }

    pub fn to_series(&self, trunc: i64) -> TruncSeries<S> {
        if self.is_zero() || trunc < 0 {
            return TruncSeries::zero(&self.proto, trunc);
        }
        let top = (self.c.len() as i64 - 1).min(trunc);
        let coeffs = self.c[..=top as usize].to_vec();
        TruncSeries::from_coeffs(0, coeffs, trunc, &self.proto)
    }
}

impl<S: Scalar> PartialEq for PolyQ<S> {
    fn eq(&self, other: &Self) -> bool {
        self.c.len() == other.c.len() && self.c.iter().zip(&other.c).all(|(a, b)| a == b)
    }
}

/// Rational function in Q over a scalar field; numerator and denominator are
/// kept unreduced except that constant denominators are folded away.
#[derive(Debug, Clone)]
pub struct RatQ<S: Scalar> {
    pub num: PolyQ<S>,
    pub den: PolyQ<S>,
}

impl<S: Scalar> RatQ<S> {
    pub fn new(num: PolyQ<S>, den: PolyQ<S>) -> Result<Self> {
        if den.is_zero() {
            return Err(Error::DivisionByZero);
        }
        let mut r = RatQ { num, den };
        r.normalize();
        Ok(r)
    }

    pub fn from_poly(num: PolyQ<S>) -> Self {
        let den = PolyQ::constant(num.proto().one_like());
        RatQ { num, den }
    }

    fn normalize(&mut self) {
        if self.num.is_zero() {
            self.den = PolyQ::constant(self.num.proto().one_like());
            return;
        }
        if self.den.degree() == Some(0) {
            if let Ok(inv) = self.den.coeff(0).inv() {
                self.num = self.num.mul_scalar(&inv);
                self.den = PolyQ::constant(self.num.proto().one_like());
            }
        }
    }

    pub fn eval(&self, x: &S) -> Result<S> {
        let d = self.den.eval(x);
        Ok(self.num.eval(x) * &d.inv()?)
    }

    pub fn scale_arg(&self, f: &S) -> Self {
        let mut r = RatQ {
            num: self.num.scale_arg(f),
            den: self.den.scale_arg(f),
        };
        r.normalize();
        r
    }
}

impl<S: Scalar> PartialEq for RatQ<S> {
    fn eq(&self, other: &Self) -> bool {
        self.num.mul(&other.den) == other.num.mul(&self.den)
    }
}

impl<S: Scalar> std::ops::Add<&RatQ<S>> for RatQ<S> {
    type Output = RatQ<S>;
    fn add(self, o: &RatQ<S>) -> RatQ<S> {
        let num = self.num.mul(&o.den).add(&o.num.mul(&self.den));
        let den = self.den.mul(&o.den);
        let mut r = RatQ { num, den };
        r.normalize();
        r
    }
}

impl<S: Scalar> std::ops::Sub<&RatQ<S>> for RatQ<S> {
    type Output = RatQ<S>;
    fn sub(self, o: &RatQ<S>) -> RatQ<S> {
        self + &(-o.clone())
    }
}

impl<S: Scalar> std::ops::Mul<&RatQ<S>> for RatQ<S> {
    type Output = RatQ<S>;
    fn mul(self, o: &RatQ<S>) -> RatQ<S> {
        let mut r = RatQ {
            num: self.num.mul(&o.num),
            den: self.den.mul(&o.den),
        };
        r.normalize();
        r
    }
}

impl<S: Scalar> std::ops::Neg for RatQ<S> {
    type Output = RatQ<S>;
    fn neg(self) -> RatQ<S> {
        RatQ {
            num: self.num.neg(),
            den: self.den,
        }
    }
}

impl<S: Scalar> Scalar for RatQ<S> {
    const EXACT: bool = S::EXACT;

    fn zero_like(&self) -> Self {
        RatQ::from_poly(PolyQ::zero(self.num.proto()))
    }

    fn one_like(&self) -> Self {
        RatQ::from_poly(PolyQ::constant(self.num.proto().one_like()))
    }

    fn from_rational(&self, r: &Rational) -> Self {
        RatQ::from_poly(PolyQ::constant(self.num.proto().from_rational(r)))
    }

    fn is_zero(&self) -> bool {
        self.num.is_zero()
    }

    fn inv(&self) -> Result<Self> {
        if self.num.is_zero() {
            return Err(Error::DivisionByZero);
        }
        RatQ::new(self.den.clone(), self.num.clone())
    }

    fn same_field(&self, other: &Self) -> bool {
        self.num.proto().same_field(other.num.proto())
    }
}

/// Operator basis: sigma is the Q-shift Q -> qQ; delta is (sigma - id)/(q-1).
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum OpBasis {
    Sigma,
    Delta,
}

/// Linear q-difference operator sum_k a_k(Q) op^k with polynomial
/// coefficients; `normalization` records any overall factor divided out of
/// all coefficients (one if none).
#[derive(Debug, Clone, PartialEq)]
pub struct QDiffOp<S: Scalar> {
    pub q: S,
    pub basis: OpBasis,
    pub coeffs: Vec<PolyQ<S>>,
    pub normalization: S,
}

impl<S: Scalar> QDiffOp<S> {
    pub fn new(q: S, basis: OpBasis, coeffs: Vec<PolyQ<S>>) -> Self {
        assert!(!coeffs.is_empty(), "operator needs at least one coefficient");
        assert!(
            !coeffs.last().unwrap().is_zero(),
            "leading coefficient must not vanish identically"
        );
        let normalization = q.one_like();
        QDiffOp {
            q,
            basis,
            coeffs,
            normalization,
        }
    }

    pub fn degree(&self) -> usize {
        self.coeffs.len() - 1
    }

    /// Largest Q-degree among the coefficients.
    pub fn q_degree_demand(&self) -> i64 {
        self.coeffs
            .iter()
            .filter_map(|p| p.degree())
            .max()
            .unwrap_or(0) as i64
    }
}

/// Linear differential operator sum_k b_k(Q) theta^k, theta = Q d/dQ.
#[derive(Debug, Clone, PartialEq)]
pub struct DiffOp<S: Scalar> {
    pub coeffs: Vec<PolyQ<S>>,
}

impl<S: Scalar> DiffOp<S> {
    pub fn new(coeffs: Vec<PolyQ<S>>) -> Self {
        assert!(!coeffs.is_empty(), "operator needs at least one coefficient");
        assert!(
            !coeffs.last().unwrap().is_zero(),
            "leading coefficient must not vanish identically"
        );
        DiffOp { coeffs }
    }

    pub fn degree(&self) -> usize {
        self.coeffs.len() - 1
    }

    pub fn q_degree_demand(&self) -> i64 {
        self.coeffs
            .iter()
            .filter_map(|p| p.degree())
            .max()
            .unwrap_or(0) as i64
    }
}

/// prod_j (1 - Lambda_j sigma) - Q, expanded into sigma powers through
/// elementary symmetric functions of the Lambda_j.
pub fn make_kth_operator<S: Scalar>(q: &S, lambdas: &[S]) -> QDiffOp<S> {
    let m = lambdas.len();
    let mut e = vec![q.zero_like(); m + 1];
    e[0] = q.one_like();
    for l in lambdas {
        for k in (1..=m).rev() {
            e[k] = e[k].clone() + &(e[k - 1].clone() * l);
        }
    }
    let mut coeffs: Vec<PolyQ<S>> = e
        .into_iter()
        .enumerate()
        .map(|(k, v)| PolyQ::constant(if k % 2 == 1 { -v } else { v }))
        .collect();
    coeffs[0] = coeffs[0].sub(&PolyQ::monomial(q, 1, q.one_like()));
    QDiffOp::new(q.clone(), OpBasis::Sigma, coeffs)
}

/// (1 - sigma)^{n+1} - Q.
pub fn make_kth_operator_noneq<S: Scalar>(q: &S, n: usize) -> QDiffOp<S> {
    make_kth_operator(q, &vec![q.one_like(); n + 1])
}

/// prod_j (-lambda_j + z theta) - Q, expanded into theta powers.
pub fn make_coh_operator<S: Scalar>(z: &S, lambdas: &[S]) -> DiffOp<S> {
    let mut c = vec![z.one_like()];
    for l in lambdas {
        let mut next = vec![z.zero_like(); c.len() + 1];
        for (k, v) in c.iter().enumerate() {
            next[k] = next[k].clone() - &(l.clone() * v);
            next[k + 1] = next[k + 1].clone() + &(z.clone() * v);
        }
        c = next;
    }
    let mut coeffs: Vec<PolyQ<S>> = c.into_iter().map(PolyQ::constant).collect();
    coeffs[0] = coeffs[0].sub(&PolyQ::monomial(z, 1, z.one_like()));
    DiffOp::new(coeffs)
}

/// (z theta)^{n+1} - Q.
pub fn make_coh_operator_noneq<S: Scalar>(z: &S, n: usize) -> DiffOp<S> {
    make_coh_operator(z, &vec![z.zero_like(); n + 1])
}

fn binom_table(n: usize) -> Vec<Vec<Rational>> {
    let mut t: Vec<Vec<Rational>> = Vec::with_capacity(n + 1);
    for k in 0..=n {
        let mut row = vec![Rational::one(); k + 1];
        for j in 1..k {
            row[j] = t[k - 1][j - 1].clone() + t[k - 1][j].clone();
        }
        t.push(row);
    }
    t
}

/// Rewrites a sigma-basis operator through sigma = id + (q-1) delta; exact,
/// inverted by `to_sigma_form`.
pub fn to_delta_form<S: Scalar>(op: &QDiffOp<S>) -> Result<QDiffOp<S>> {
    if op.basis == OpBasis::Delta {
        return Ok(op.clone());
    }
    let qm1 = op.q.clone() - &op.q.one_like();
    if qm1.is_zero() {
        return Err(Error::QEqualsOne);
    }
    let n = op.degree();
    let binom = binom_table(n);
    let mut coeffs = Vec::with_capacity(n + 1);
    let mut qm1_pow = op.q.one_like();
    for m in 0..=n {
        if m > 0 {
            qm1_pow = qm1_pow.clone() * &qm1;
        }
        let mut b = PolyQ::zero(&op.q);
        for k in m..=n {
            b = b.add(&op.coeffs[k].mul_scalar(&op.q.from_rational(&binom[k][m])));
        }
        coeffs.push(b.mul_scalar(&qm1_pow));
    }
    Ok(QDiffOp {
        q: op.q.clone(),
        basis: OpBasis::Delta,
        coeffs,
        normalization: op.normalization.clone(),
    })
}

/// Rewrites a delta-basis operator through delta = (sigma - id)/(q-1).
pub fn to_sigma_form<S: Scalar>(op: &QDiffOp<S>) -> Result<QDiffOp<S>> {
    if op.basis == OpBasis::Sigma {
        return Ok(op.clone());
    }
    let qm1 = op.q.clone() - &op.q.one_like();
    let qm1_inv = qm1.inv().map_err(|_| Error::QEqualsOne)?;
    let n = op.degree();
    let binom = binom_table(n);
    let mut coeffs = Vec::with_capacity(n + 1);
    for k in 0..=n {
        let mut a = PolyQ::zero(&op.q);
        let mut scale = qm1_inv.pow_i64(k as i64).expect("q != 1");
        for m in k..=n {
            if m > k {
                scale = scale.clone() * &qm1_inv;
            }
            let mut v = scale.clone() * &op.q.from_rational(&binom[m][k]);
            if (m - k) % 2 == 1 {
                v = -v;
            }
            a = a.add(&op.coeffs[m].mul_scalar(&v));
        }
        coeffs.push(a);
    }
    Ok(QDiffOp {
        q: op.q.clone(),
        basis: OpBasis::Sigma,
        coeffs,
        normalization: op.normalization.clone(),
    })
}

/// ((1-q)/z)^npow, the factor by which the equation argument is rescaled.
pub fn pullback_scale<S: Scalar>(q: &S, z: &S, npow: i64) -> Result<S> {
    ((q.one_like() - q) * &z.inv()?).pow_i64(npow)
}

/// Substitutes Q -> ((1-q)/z)^npow Q in every coefficient; constants in Q are
/// untouched.
pub fn pullback_op<S: Scalar>(op: &QDiffOp<S>, z: &S, npow: i64) -> Result<QDiffOp<S>> {
    let c = pullback_scale(&op.q, z, npow)?;
    Ok(QDiffOp {
        q: op.q.clone(),
        basis: op.basis,
        coeffs: op.coeffs.iter().map(|p| p.scale_arg(&c)).collect(),
        normalization: op.normalization.clone(),
    })
}

/// Divides every coefficient by `f` and records the factor; used to strip the
/// overall scale a pullback introduces so the q -> 1 limit stays finite.
pub fn clear_factor<S: Scalar>(op: &QDiffOp<S>, f: &S) -> Result<QDiffOp<S>> {
    let finv = f.inv().map_err(|_| Error::ZeroScale)?;
    Ok(QDiffOp {
        q: op.q.clone(),
        basis: op.basis,
        coeffs: op.coeffs.iter().map(|p| p.mul_scalar(&finv)).collect(),
        normalization: op.normalization.clone() * f,
    })
}

/// Pullback with npow = degree, normalized by the same scale. For the
/// J-function annihilators this is the form whose delta-coefficients converge
/// as q -> 1.
pub fn pullback_normalized<S: Scalar>(op: &QDiffOp<S>, z: &S) -> Result<QDiffOp<S>> {
    let npow = op.degree() as i64;
    let c = pullback_scale(&op.q, z, npow)?;
    clear_factor(&pullback_op(op, z, npow)?, &c)
}

/// The normalized pullbacked delta-form annihilator of the equivariant
/// K-theoretic J-columns at numeric q, with Lambda_i = q^{-lambda_i / z}.
pub fn eq_delta_op_at(
    q: &ComplexAP,
    lambdas: &[ComplexAP],
    z: &ComplexAP,
) -> Result<QDiffOp<ComplexAP>> {
    let zinv = z.inv()?;
    let big: Vec<ComplexAP> = lambdas
        .iter()
        .map(|l| principal_power(q, &-(l.clone() * &zinv)))
        .collect::<Result<_>>()?;
    pullback_normalized(&to_delta_form(&make_kth_operator(q, &big))?, z)
}

/// Non-equivariant counterpart of `eq_delta_op_at`.
pub fn noneq_delta_op_at(q: &ComplexAP, n: usize, z: &ComplexAP) -> Result<QDiffOp<ComplexAP>> {
    pullback_normalized(&to_delta_form(&make_kth_operator_noneq(q, n))?, z)
}

/// Applies a q-difference operator to a log-polynomial series; the all-zero
/// result certifies annihilation to the series' truncation order.
pub fn apply_qdiff_logpoly<S: Scalar>(
    op: &QDiffOp<S>,
    sol: &LogPoly<S>,
) -> Result<LogPoly<S>> {
    if sol.trunc() < op.q_degree_demand() {
        return Err(Error::TruncationTooShort);
    }
    let trunc = sol.trunc();
    let mut iter = sol.clone();
    let mut acc = sol.mul_series(&op.coeffs[0].to_series(trunc));
    for k in 1..=op.degree() {
        iter = match op.basis {
            OpBasis::Sigma => iter.sigma(&op.q),
            OpBasis::Delta => iter.delta(&op.q)?,
        };
        acc = acc.add(&iter.mul_series(&op.coeffs[k].to_series(trunc)));
    }
    Ok(acc)
}

/// Applies a q-difference operator to a stored equivariant column, where the
/// shift acquires the column's character multiplier.
pub fn apply_qdiff_column<S: Scalar>(
    op: &QDiffOp<S>,
    col: &EqColumn<S>,
) -> Result<TruncSeries<S>> {
    if col.series.trunc() < op.q_degree_demand() {
        return Err(Error::TruncationTooShort);
    }
    let trunc = col.series.trunc();
    let mut iter = col.series.clone();
    let mut acc = col.series.mul(&op.coeffs[0].to_series(trunc));
    for k in 1..=op.degree() {
        iter = match op.basis {
            OpBasis::Sigma => iter.sigma_shift(&op.q).mul_scalar(&col.sigma_mult),
            OpBasis::Delta => iter.delta_q_twisted(&op.q, &col.sigma_mult)?,
        };
        acc = acc.add(&iter.mul(&op.coeffs[k].to_series(trunc)));
    }
    Ok(acc)
}

/// Applies a differential operator to a log-polynomial series; theta acts by
/// the Euler operator with the log chain rule.
pub fn apply_diff_logpoly<S: Scalar>(op: &DiffOp<S>, sol: &LogPoly<S>) -> Result<LogPoly<S>> {
    if sol.trunc() < op.q_degree_demand() {
        return Err(Error::TruncationTooShort);
    }
    let trunc = sol.trunc();
    let mut iter = sol.clone();
    let mut acc = sol.mul_series(&op.coeffs[0].to_series(trunc));
    for k in 1..=op.degree() {
        iter = iter.euler_log();
        acc = acc.add(&iter.mul_series(&op.coeffs[k].to_series(trunc)));
    }
    Ok(acc)
}

/// Applies a differential operator to a stored fixed-point component, where
/// theta gains the component's marker exponent.
pub fn apply_diff_column<S: Scalar>(
    op: &DiffOp<S>,
    col: &CohEqColumn<S>,
) -> Result<TruncSeries<S>> {
    if col.series.trunc() < op.q_degree_demand() {
        return Err(Error::TruncationTooShort);
    }
    let trunc = col.series.trunc();
    let mut iter = col.series.clone();
    let mut acc = col.series.mul(&op.coeffs[0].to_series(trunc));
    for k in 1..=op.degree() {
        iter = iter.euler().add(&iter.mul_scalar(&col.marker_exponent));
        acc = acc.add(&iter.mul(&op.coeffs[k].to_series(trunc)));
    }
    Ok(acc)
}

fn companion_from_coeffs<S: Scalar>(coeffs: &[PolyQ<S>], proto: &S) -> Result<Mat<RatQ<S>>> {
    let n = coeffs.len() - 1;
    assert!(n >= 1, "companion needs operator degree >= 1");
    let lead = &coeffs[n];
    if lead.is_zero() {
        return Err(Error::LeadingCoefficientVanishes);
    }
    let zero = RatQ::from_poly(PolyQ::zero(proto));
    let one = zero.one_like();
    let mut rows = vec![vec![zero.clone(); n]; n];
    for (i, row) in rows.iter_mut().enumerate().take(n - 1) {
        row[i + 1] = one.clone();
    }
    for k in 0..n {
        rows[n - 1][k] = RatQ::new(coeffs[k].neg(), lead.clone())?;
    }
    Ok(Mat::from_rows(rows))
}

/// Companion matrix in the operator's own basis: for a sigma-form operator
/// the vector (y, sigma y, ..) satisfies sigma X = A X; for a delta-form
/// operator the delta-iterate vector satisfies delta X = A X.
pub fn companion_qdiff<S: Scalar>(op: &QDiffOp<S>) -> Result<Mat<RatQ<S>>> {
    companion_from_coeffs(&op.coeffs, &op.q)
}

/// Companion of a differential operator: theta X = A X on theta-iterates.
pub fn companion_diff<S: Scalar>(op: &DiffOp<S>) -> Result<Mat<RatQ<S>>> {
    let proto = op.coeffs[0].proto().clone();
    companion_from_coeffs(&op.coeffs, &proto)
}

/// Per-coefficient behavior of a delta-form operator family along a t-grid.
#[derive(Debug, Clone)]
pub struct CoefficientLimit {
    pub delta_power: usize,
    /// max over Q-degrees of the distance to the target coefficient, per t
    pub errors: Vec<f64>,
    pub converged: bool,
}

#[derive(Debug, Clone)]
pub struct FormalLimitReport {
    pub ts: Vec<f64>,
    pub coefficients: Vec<CoefficientLimit>,
    /// coefficients observed at the smallest t
    pub candidate: DiffOp<ComplexAP>,
    pub confluent: bool,
}

/// Builds the operator at each t of a decreasing grid and compares every
/// delta-power coefficient with the target differential operator. A
/// coefficient converges when its last three errors decrease and the final
/// error is below `tol`; a coefficient whose errors grow ends the run.
pub fn formal_limit(
    build: impl Fn(f64) -> Result<QDiffOp<ComplexAP>>,
    ts: &[f64],
    target: &DiffOp<ComplexAP>,
    tol: f64,
) -> Result<FormalLimitReport> {
    assert!(!ts.is_empty(), "empty t grid");
    assert!(
        ts.windows(2).all(|w| w[1] < w[0]),
        "t grid must strictly decrease"
    );
    let n = target.degree();
    let mut errors: Vec<Vec<f64>> = vec![Vec::with_capacity(ts.len()); n + 1];
    let mut last_op = None;
    for &t in ts {
        let op = build(t)?;
        assert!(op.basis == OpBasis::Delta, "limit runs in the delta basis");
        assert!(op.degree() == n, "operator degree must match the target");
        for k in 0..=n {
            let dmax = op.coeffs[k]
                .degree()
                .unwrap_or(0)
                .max(target.coeffs[k].degree().unwrap_or(0));
            let mut worst = Float::with_val(op.q.prec(), 0);
            for j in 0..=dmax {
                let d = op.coeffs[k].coeff(j).dist(&target.coeffs[k].coeff(j));
                if d > worst {
                    worst = d;
                }
            }
            errors[k].push(worst.to_f64());
        }
        last_op = Some(op);
    }
    let mut coefficients = Vec::with_capacity(n + 1);
    let mut confluent = true;
    for (k, errs) in errors.iter().enumerate() {
        let m = errs.len();
        if m >= 3 && errs[m - 3] < errs[m - 2] && errs[m - 2] < errs[m - 1] && errs[m - 1] > 1.0 {
            return Err(Error::DivergentCoefficient(format!(
                "delta^{k} coefficient error grows: {:?}",
                errs
            )));
        }
        // coefficients that agree exactly sit at rounding level from the
        // start; treat anything below the floor as settled
        let floor = tol * 1e-6;
        let tail_decreasing = m < 3
            || (errs[m - 3] >= errs[m - 2] && errs[m - 2] >= errs[m - 1])
            || (errs[m - 2] < floor && errs[m - 1] < floor);
        let converged = tail_decreasing && errs[m - 1] < tol;
        confluent &= converged;
        coefficients.push(CoefficientLimit {
            delta_power: k,
            errors: errs.clone(),
            converged,
        });
    }
    let candidate = DiffOp {
        coeffs: last_op.expect("nonempty grid").coeffs,
    };
    Ok(FormalLimitReport {
        ts: ts.to_vec(),
        coefficients,
        candidate,
        confluent,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::jfun::{build_fundamental_noneq, build_jcoh_eq, build_jcoh_noneq, build_jk_eq,
        build_jk_noneq, decompose_ji};
    use crate::scalar::{RatFunc, Var};

    fn qv() -> RatFunc {
        RatFunc::var(Var::Q)
    }

    fn zv() -> RatFunc {
        RatFunc::var(Var::Z)
    }

    fn lam(i: u32) -> RatFunc {
        RatFunc::var(Var::LambdaK(i))
    }

    fn rat(p: i64, q: i64) -> Rational {
        Rational::new(p.into(), q.into())
    }

    fn rq(v: i64) -> RatFunc {
        RatFunc::constant(rat(v, 1))
    }

    #[test]
    fn kth_operator_noneq_small_cases() {
        // N = 1: 1 - 2 sigma + sigma^2 - Q
        let op = make_kth_operator_noneq(&qv(), 1);
        assert_eq!(op.degree(), 2);
        assert_eq!(op.coeffs[0], PolyQ::from_coeffs(&qv(), vec![rq(1), rq(-1)]));
        assert_eq!(op.coeffs[1], PolyQ::constant(rq(-2)));
        assert_eq!(op.coeffs[2], PolyQ::constant(rq(1)));
        // N = 0: 1 - sigma - Q
        let op = make_kth_operator_noneq(&qv(), 0);
        assert_eq!(op.coeffs[0], PolyQ::from_coeffs(&qv(), vec![rq(1), rq(-1)]));
        assert_eq!(op.coeffs[1], PolyQ::constant(rq(-1)));
    }

    #[test]
    fn kth_operator_eq_symbolic() {
        // N = 1: 1 - (L0 + L1) sigma + L0 L1 sigma^2 - Q
        let op = make_kth_operator(&qv(), &[lam(0), lam(1)]);
        assert_eq!(op.coeffs[1], PolyQ::constant(-(lam(0) + &lam(1))));
        assert_eq!(op.coeffs[2], PolyQ::constant(lam(0) * &lam(1)));
    }

    #[test]
    fn kth_operator_matches_product_expansion() {
        // oracle: expand prod_j (1 - Lambda_j sigma) by convolution, N <= 3
        for n in 0..=3usize {
            let lambdas: Vec<RatFunc> = (0..=n as u32).map(lam).collect();
            let op = make_kth_operator(&qv(), &lambdas);
            let mut prod = vec![RatFunc::one()];
            for l in &lambdas {
                let mut next = vec![RatFunc::zero(); prod.len() + 1];
                for (k, v) in prod.iter().enumerate() {
                    next[k] = next[k].clone() + v;
                    next[k + 1] = next[k + 1].clone() - &(l.clone() * v);
                }
                prod = next;
            }
            for (k, v) in prod.iter().enumerate() {
                let mut expect = PolyQ::constant(v.clone());
                if k == 0 {
                    expect = expect.sub(&PolyQ::monomial(&qv(), 1, RatFunc::one()));
                }
                assert!(op.coeffs[k] == expect, "N = {n}, k = {k}");
            }
        }
    }

    #[test]
    fn coh_operator_small_cases() {
        // noneq N = 2: z^3 theta^3 - Q
        let op = make_coh_operator_noneq(&zv(), 2);
        assert_eq!(op.coeffs[0], PolyQ::monomial(&zv(), 1, -RatFunc::one()));
        assert!(op.coeffs[1].is_zero());
        assert!(op.coeffs[2].is_zero());
        assert_eq!(op.coeffs[3], PolyQ::constant(zv().pow_i64(3).unwrap()));
        // eq N = 0: -lambda_0 + z theta - Q
        let l0 = RatFunc::var(Var::LambdaH(0));
        let op = make_coh_operator(&zv(), &[l0.clone()]);
        assert_eq!(
            op.coeffs[0],
            PolyQ::from_coeffs(&zv(), vec![-l0, -RatFunc::one()])
        );
        assert_eq!(op.coeffs[1], PolyQ::constant(zv()));
        // eq N = 1, z = 1, lambda = (0, 1/3): theta^2 - (1/3) theta - Q
        let op = make_coh_operator(&RatFunc::one(), &[rq(0), RatFunc::constant(rat(1, 3))]);
        assert_eq!(
            op.coeffs[0],
            PolyQ::monomial(&RatFunc::one(), 1, -RatFunc::one())
        );
        assert_eq!(op.coeffs[1], PolyQ::constant(RatFunc::constant(rat(-1, 3))));
        assert_eq!(op.coeffs[2], PolyQ::constant(RatFunc::one()));
    }

    #[test]
    fn delta_form_small_cases() {
        // 1 - sigma -> -(q-1) delta
        let op = QDiffOp::new(
            qv(),
            OpBasis::Sigma,
            vec![PolyQ::constant(RatFunc::one()), PolyQ::constant(-RatFunc::one())],
        );
        let d = to_delta_form(&op).unwrap();
        assert!(d.coeffs[0].is_zero());
        assert_eq!(d.coeffs[1], PolyQ::constant(-(qv() - &RatFunc::one())));
        // (1 - sigma)^2 -> (q-1)^2 delta^2
        let op = QDiffOp::new(
            qv(),
            OpBasis::Sigma,
            vec![
                PolyQ::constant(RatFunc::one()),
                PolyQ::constant(rq(-2)),
                PolyQ::constant(RatFunc::one()),
            ],
        );
        let d = to_delta_form(&op).unwrap();
        assert!(d.coeffs[0].is_zero());
        assert!(d.coeffs[1].is_zero());
        let qm1 = qv() - &RatFunc::one();
        assert_eq!(d.coeffs[2], PolyQ::constant(qm1.clone() * &qm1));
    }

    #[test]
    fn delta_form_eq_matches_direct_expansion() {
        // oracle: expand prod_k ((1 - Lambda_k) - Lambda_k (q-1) delta) - Q
        let lambdas = vec![lam(0), lam(1)];
        let op = make_kth_operator(&qv(), &lambdas);
        let d = to_delta_form(&op).unwrap();
        let qm1 = qv() - &RatFunc::one();
        let mut prod = vec![RatFunc::one()];
        for l in &lambdas {
            let mut next = vec![RatFunc::zero(); prod.len() + 1];
            for (k, v) in prod.iter().enumerate() {
                next[k] = next[k].clone() + &((RatFunc::one() - l) * v);
                next[k + 1] = next[k + 1].clone() - &(l.clone() * &qm1 * v);
            }
            prod = next;
        }
        for (k, v) in prod.iter().enumerate() {
            let mut expect = PolyQ::constant(v.clone());
            if k == 0 {
                expect = expect.sub(&PolyQ::monomial(&qv(), 1, RatFunc::one()));
            }
            assert!(d.coeffs[k] == expect, "k = {k}");
        }
    }

    #[test]
    fn basis_round_trip_exact() {
        let ops = vec![
            make_kth_operator(&qv(), &[lam(0), lam(1), lam(2)]),
            QDiffOp::new(
                qv(),
                OpBasis::Sigma,
                vec![
                    PolyQ::from_coeffs(&qv(), vec![rq(1), rq(2)]),
                    PolyQ::from_coeffs(&qv(), vec![rq(0), rq(0), rq(3)]),
                    PolyQ::from_coeffs(&qv(), vec![rq(5), -qv()]),
                ],
            ),
        ];
        for op in ops {
            let back = to_sigma_form(&to_delta_form(&op).unwrap()).unwrap();
            assert!(back == op);
        }
    }

    #[test]
    fn delta_form_rejects_q_equal_one() {
        let one = Rational::one();
        let op = QDiffOp::new(
            one.clone(),
            OpBasis::Sigma,
            vec![PolyQ::constant(one.clone()), PolyQ::constant(one.clone())],
        );
        assert!(matches!(to_delta_form(&op), Err(Error::QEqualsOne)));
    }

    #[test]
    fn pullback_substitution_and_clearing() {
        // -Q -> -((1-q)/z)^2 Q under the substitution alone
        let op = QDiffOp::new(
            qv(),
            OpBasis::Delta,
            vec![PolyQ::monomial(&qv(), 1, -RatFunc::one())],
        );
        let pb = pullback_op(&op, &zv(), 2).unwrap();
        let c = pullback_scale(&qv(), &zv(), 2).unwrap();
        assert_eq!(pb.coeffs[0], PolyQ::monomial(&qv(), 1, -c.clone()));
        // constants in Q are unchanged by the substitution
        let op = QDiffOp::new(qv(), OpBasis::Delta, vec![PolyQ::constant(rq(7))]);
        assert!(pullback_op(&op, &zv(), 2).unwrap().coeffs[0] == PolyQ::constant(rq(7)));
        // noneq N = 1: delta form pullback, normalized -> (z delta)^2 - Q
        let op = make_kth_operator_noneq(&qv(), 1);
        let pb = pullback_normalized(&to_delta_form(&op).unwrap(), &zv()).unwrap();
        assert_eq!(pb.coeffs[0], PolyQ::monomial(&qv(), 1, -RatFunc::one()));
        assert!(pb.coeffs[1].is_zero());
        assert_eq!(pb.coeffs[2], PolyQ::constant(zv() * &zv()));
        assert!(pb.normalization == pullback_scale(&qv(), &zv(), 2).unwrap());
    }

    #[test]
    fn residual_noneq_branches_vanish() {
        let op = make_kth_operator_noneq(&qv(), 1);
        let j = build_jk_noneq(&qv(), 1, 6).unwrap();
        for ji in decompose_ji(&j) {
            let r = apply_qdiff_logpoly(&op, &ji).unwrap();
            assert!(r.is_zero());
        }
        // the delta form annihilates them too
        let d = to_delta_form(&op).unwrap();
        for ji in decompose_ji(&j) {
            assert!(apply_qdiff_logpoly(&d, &ji).unwrap().is_zero());
        }
    }

    #[test]
    fn residual_detects_perturbation() {
        let op = make_kth_operator_noneq(&qv(), 1);
        let j = build_jk_noneq(&qv(), 1, 6).unwrap();
        let branch = &decompose_ji(&j)[0];
        // (1 - sigma)^2 - Q on Q^3 alone: (1 - q^3)^2 Q^3 - Q^4
        let spike = LogPoly::from_series(TruncSeries::monomial(3, RatFunc::one(), 6));
        let perturbed = branch.add(&spike);
        let r = apply_qdiff_logpoly(&op, &perturbed).unwrap();
        assert!(!r.is_zero());
        let q3 = qv().pow_i64(3).unwrap();
        let want3 = (RatFunc::one() - &q3) * &(RatFunc::one() - &q3);
        assert_eq!(r.term(0).unwrap().coeff(3), want3);
        assert_eq!(r.term(0).unwrap().coeff(4), -RatFunc::one());
    }

    #[test]
    fn residual_eq_column_vanishes() {
        let lambdas = vec![lam(0), lam(1)];
        let op = make_kth_operator(&qv(), &lambdas);
        let j = build_jk_eq(&qv(), &lambdas, 5).unwrap();
        for col in &j.columns {
            assert!(apply_qdiff_column(&op, col).unwrap().is_zero());
        }
    }

    #[test]
    fn residual_coh_solutions_vanish() {
        // non-equivariant, N = 2, through the log chain rule
        let op = make_coh_operator_noneq(&RatFunc::one(), 2);
        let j = build_jcoh_noneq(&RatFunc::one(), 2, 5).unwrap();
        let branches: Vec<LogPoly<RatFunc>> = (0..=2)
            .map(|i| {
                let terms: Vec<TruncSeries<RatFunc>> = j
                    .terms()
                    .iter()
                    .map(|ts| {
                        let coeffs: Vec<RatFunc> =
                            (0..=ts.trunc()).map(|d| ts.coeff(d).coeff(i).clone()).collect();
                        TruncSeries::from_coeffs(0, coeffs, ts.trunc(), &RatFunc::zero())
                    })
                    .collect();
                LogPoly::from_terms(terms)
            })
            .collect();
        for b in &branches {
            assert!(apply_diff_logpoly(&op, b).unwrap().is_zero());
        }
        // equivariant, lambda = (0, 1/3), z = 1, marker rule included
        let lambdas = vec![rq(0), RatFunc::constant(rat(1, 3))];
        let op = make_coh_operator(&RatFunc::one(), &lambdas);
        let j = build_jcoh_eq(&lambdas, &RatFunc::one(), 5).unwrap();
        for col in &j.columns {
            assert!(apply_diff_column(&op, col).unwrap().is_zero());
        }
    }

    #[test]
    fn truncation_demand_enforced() {
        let op = make_kth_operator_noneq(&qv(), 1);
        let short = LogPoly::from_series(TruncSeries::constant(RatFunc::one(), 0));
        assert!(matches!(
            apply_qdiff_logpoly(&op, &short),
            Err(Error::TruncationTooShort)
        ));
    }

    #[test]
    fn companion_degree_one() {
        // a0 + a1 sigma: A = (-a0/a1)
        let op = QDiffOp::new(
            qv(),
            OpBasis::Sigma,
            vec![
                PolyQ::from_coeffs(&qv(), vec![rq(1), rq(-1)]),
                PolyQ::constant(rq(2)),
            ],
        );
        let a = companion_qdiff(&op).unwrap();
        assert_eq!(a.n(), 1);
        let v = a.entry(0, 0).eval(&rq(3)).unwrap();
        // -(1 - 3)/2 = 1
        assert_eq!(v, RatFunc::one());
    }

    #[test]
    fn sigma_and_delta_companions_are_related() {
        // The sigma-iterate and delta-iterate vectors differ by the constant
        // matrix P[l][j] = C(l, j)(q-1)^j, so A_sigma P = P (Id + (q-1) B_delta).
        let op = make_kth_operator_noneq(&qv(), 2);
        let d = to_delta_form(&op).unwrap();
        let a = companion_qdiff(&op).unwrap();
        let b = companion_qdiff(&d).unwrap();
        let n = a.n();
        let zero = b.entry(0, 0).zero_like();
        let qm1 = RatQ::from_poly(PolyQ::constant(qv() - &RatFunc::one()));
        let binom = binom_table(n);
        let p = Mat::from_rows(
            (0..n)
                .map(|l| {
                    (0..n)
                        .map(|j| {
                            if j > l {
                                zero.clone()
                            } else {
                                qm1.pow_i64(j as i64).unwrap() * &zero.from_rational(&binom[l][j])
                            }
                        })
                        .collect()
                })
                .collect(),
        );
        let sys = Mat::identity(n, &zero).add(&b.mul_scalar(&qm1));
        assert!(a.mul(&p) == p.mul(&sys));
    }

    #[test]
    fn fundamental_matrix_satisfies_companion_system() {
        // delta X = B X for the pullbacked noneq system, N = 1
        let q = qv();
        let z = zv();
        let op = pullback_normalized(&to_delta_form(&make_kth_operator_noneq(&q, 1)).unwrap(), &z)
            .unwrap();
        let b = companion_qdiff(&op).unwrap();
        let j = build_jk_noneq(&q, 1, 4).unwrap();
        let x = build_fundamental_noneq(&j, &q, &z).unwrap();
        let trunc = 4i64;
        // series form of each companion entry
        let entry_series = |i: usize, jj: usize| {
            let e = b.entry(i, jj);
            e.num
                .to_series(trunc)
                .mul(&e.den.to_series(trunc).invert().unwrap())
        };
        for col in 0..2 {
            for row in 0..2 {
                let lhs = x.entries[row][col].delta(&q).unwrap();
                let mut rhs = LogPoly::zero(&RatFunc::zero(), trunc);
                for k in 0..2 {
                    rhs = rhs.add(&x.entries[k][col].mul_series(&entry_series(row, k)));
                }
                assert!(lhs == rhs, "row {row}, col {col}");
            }
        }
    }

    #[test]
    fn companion_regular_at_origin() {
        // sigma-form companion of the noneq operator has det A(0) != 0
        let op = make_kth_operator_noneq(&qv(), 1);
        let a = companion_qdiff(&op).unwrap();
        let at0 = a.try_map(|e| e.eval(&RatFunc::zero())).unwrap();
        assert!(!Scalar::is_zero(&at0.det()));
    }

    #[test]
    fn formal_limit_eq_converges() {
        let prec = 192;
        let z = ComplexAP::one(prec);
        let lams = vec![
            ComplexAP::zero(prec),
            ComplexAP::from_f64(prec, 1.0 / 3.0, 0.0),
        ];
        let q0 = ComplexAP::from_f64(prec, 0.5, 0.0);
        let target = make_coh_operator(&z, &lams);
        let ts = [1e-1, 1e-2, 1e-3, 1e-4];
        let report = formal_limit(
            |t| {
                let qt = principal_power(&q0, &ComplexAP::from_f64(prec, t, 0.0))?;
                eq_delta_op_at(&qt, &lams, &z)
            },
            &ts,
            &target,
            1e-3,
        )
        .unwrap();
        assert!(report.confluent);
        for c in &report.coefficients {
            assert!(c.converged, "delta^{}: {:?}", c.delta_power, c.errors);
        }
    }

    #[test]
    fn formal_limit_noneq_converges() {
        let prec = 192;
        let z = ComplexAP::one(prec);
        let q0 = ComplexAP::from_f64(prec, 0.5, 0.0);
        let target = make_coh_operator_noneq(&z, 1);
        let ts = [1e-1, 1e-2, 1e-3, 1e-4];
        let report = formal_limit(
            |t| {
                let qt = principal_power(&q0, &ComplexAP::from_f64(prec, t, 0.0))?;
                noneq_delta_op_at(&qt, 1, &z)
            },
            &ts,
            &target,
            1e-3,
        )
        .unwrap();
        assert!(report.confluent);
    }

    #[test]
    fn formal_limit_flags_divergence() {
        let prec = 128;
        let q0 = ComplexAP::from_f64(prec, 0.5, 0.0);
        let one = ComplexAP::one(prec);
        let target = DiffOp::new(vec![
            PolyQ::zero(&one),
            PolyQ::constant(one.clone()),
        ]);
        let r = formal_limit(
            |t| {
                let qt = principal_power(&q0, &ComplexAP::from_f64(prec, t, 0.0))?;
                let blow = (one.clone() - &qt).inv()?;
                Ok(QDiffOp::new(
                    qt.clone(),
                    OpBasis::Delta,
                    vec![PolyQ::constant(blow), PolyQ::constant(one.clone())],
                ))
            },
            &[1e-1, 1e-2, 1e-3, 1e-4],
            &target,
            1e-3,
        );
        assert!(matches!(r, Err(Error::DivergentCoefficient(_))));
    }
}
