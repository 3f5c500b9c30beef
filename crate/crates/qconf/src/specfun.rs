//! q-Pochhammer symbols, Jacobi theta, the q-logarithm, q-characters, and
//! binomial polynomials in the log symbol.

use num_traits::{One, Zero};

use crate::error::{Error, Result};
use crate::scalar::{principal_power, ComplexAP, Rational, Scalar};
use crate::series::{LogPoly, TruncSeries};

/// Finite q-Pochhammer product `(x; q)_d = prod_{r=0}^{d-1} (1 - q^r x)`.
pub fn qpochhammer<S: Scalar>(x: &S, q: &S, d: u64) -> S {
    let one = x.one_like();
    let mut acc = one.clone();
    let mut qpow = one.clone();
    for _ in 0..d {
        let factor = one.clone() - &(qpow.clone() * x);
        acc = acc * &factor;
        qpow = qpow * q;
    }
    acc
}

/// Result of an infinite q-Pochhammer evaluation: the truncated product, a
/// certified bound on the relative error of the omitted tail, and how many
/// factors were multiplied.
#[derive(Debug, Clone)]
pub struct QPochInf {
    pub value: ComplexAP,
    pub tail_bound: f64,
    pub factors_used: u64,
}

/// `(x; q)_inf = prod_{r>=0} (1 - q^r x)`, truncated once the certified tail
/// bound `2 |x| |q|^r / (1 - |q|)` drops below `tol`.
pub fn qpochhammer_inf(x: &ComplexAP, q: &ComplexAP, tol: f64) -> Result<QPochInf> {
    let q_abs = q.abs().to_f64();
    if !(q_abs < 1.0) {
        return Err(Error::ModulusQNotLessThanOne(format!("|q| = {q_abs}")));
    }
    let x_abs = x.abs().to_f64();
    let one = x.one_like();
    let mut acc = one.clone();
    let mut xq = x.clone();
    let mut factor_abs = x_abs;
    let mut used = 0u64;
    // Tail factors r >= R satisfy |log(1 - q^r x)| <= 2 |q^r x| once
    // |q^r x| <= 1/2, so the omitted product differs from 1 by at most
    // 2 |x| |q|^R / (1 - |q|) up to second order.
    let tail = |f: f64| 2.0 * f / (1.0 - q_abs);
    while factor_abs > 0.5 || tail(factor_abs) > tol {
        let factor = one.clone() - &xq;
        acc = acc * &factor;
        xq = xq * q;
        factor_abs *= q_abs;
        used += 1;
        if used > 1_000_000 {
            return Err(Error::NoConvergence(
                "q-Pochhammer tail did not shrink below tolerance".into(),
            ));
        }
    }
    Ok(QPochInf {
        value: acc,
        tail_bound: tail(factor_abs),
        factors_used: used,
    })
}

/// Window of theta coefficients `q^{d(d-1)/2}` for `d` in `[-m, m]`.
///
/// Coefficients are built upward by `c_{d+1} = c_d q^d` and mirrored through
/// the exact symmetry `c_d = c_{1-d}`, so the symmetry holds by construction.
#[derive(Debug, Clone)]
pub struct ThetaWindow<S: Scalar> {
    q: S,
    m: i64,
    coeffs: Vec<S>,
}

impl<S: Scalar> ThetaWindow<S> {
    pub fn new(q: &S, m: i64) -> Self {
        assert!(m >= 1, "theta window must contain d = -1, 0, 1");
        let one = q.one_like();
        // up[d] = q^{d(d-1)/2} for d = 0 .. m+1
        let mut up: Vec<S> = Vec::with_capacity(m as usize + 2);
        up.push(one.clone());
        up.push(one);
        let mut qpow = q.clone();
        for d in 1..=m {
            let next = up[d as usize].clone() * &qpow;
            up.push(next);
            qpow = qpow * q;
        }
        let coeffs = (-m..=m)
            .map(|d| {
                let idx = if d >= 1 { d } else { 1 - d };
                up[idx as usize].clone()
            })
            .collect();
        ThetaWindow { q: q.clone(), m, coeffs }
    }

    pub fn m(&self) -> i64 {
        self.m
    }

    pub fn q(&self) -> &S {
        &self.q
    }

    pub fn coeff(&self, d: i64) -> &S {
        assert!(d.abs() <= self.m);
        &self.coeffs[(d + self.m) as usize]
    }
}

impl ThetaWindow<ComplexAP> {
    /// Returns (theta(Q), Q theta'(Q)) from one shared window.
    pub fn eval_with_euler(&self, qq: &ComplexAP) -> Result<(ComplexAP, ComplexAP)> {
        let inv = qq.recip()?;
        let mut theta = qq.zero_like();
        let mut euler = qq.zero_like();
        let mut pow = qq.one_like();
        for d in 0..=self.m {
            let term = self.coeff(d).clone() * &pow;
            euler = euler + &term.mul_float(&rug::Float::with_val(term.prec(), d));
            theta = theta + &term;
            pow = pow * qq;
        }
        let mut pow = inv.clone();
        for d in 1..=self.m {
            let term = self.coeff(-d).clone() * &pow;
            euler = euler + &term.mul_float(&rug::Float::with_val(term.prec(), -d));
            theta = theta + &term;
            pow = pow * &inv;
        }
        Ok((theta, euler))
    }

    pub fn eval(&self, qq: &ComplexAP) -> Result<ComplexAP> {
        Ok(self.eval_with_euler(qq)?.0)
    }
}

/// Magnitude of the boundary term of a window of half-width `m`:
/// `|q|^{m(m-1)/2} max(|Q|, 1/|Q|)^m`.
pub fn theta_tail_bound(q_abs: f64, qq_abs: f64, m: i64) -> f64 {
    let growth = qq_abs.max(1.0 / qq_abs).ln();
    let decay = q_abs.ln();
    ((m * (m - 1)) as f64 / 2.0 * decay + m as f64 * growth).exp()
}

const WINDOW_CAP: i64 = 200_000;

/// Smallest window half-width whose boundary term is below `tol / 10`.
pub fn theta_auto_window(q: &ComplexAP, qq: &ComplexAP, tol: f64) -> Result<i64> {
    let q_abs = q.abs().to_f64();
    if q.is_negligible() || !(q_abs < 1.0) {
        return Err(Error::ModulusQNotLessThanOne(format!("|q| = {q_abs}")));
    }
    let qq_abs = qq.abs().to_f64();
    for m in 2..=WINDOW_CAP {
        if theta_tail_bound(q_abs, qq_abs, m) < tol / 10.0 {
            return Ok(m);
        }
    }
    Err(Error::WindowTooSmall {
        m: WINDOW_CAP,
        bound: format!("{:.3e}", theta_tail_bound(q_abs, qq_abs, WINDOW_CAP)),
        tol: format!("{tol:.3e}"),
    })
}

fn check_window(q: &ComplexAP, qq: &ComplexAP, m: i64, tol: f64) -> Result<()> {
    let q_abs = q.abs().to_f64();
    if q.is_negligible() || !(q_abs < 1.0) {
        return Err(Error::ModulusQNotLessThanOne(format!("|q| = {q_abs}")));
    }
    let bound = theta_tail_bound(q_abs, qq.abs().to_f64(), m);
    if bound > tol {
        return Err(Error::WindowTooSmall {
            m,
            bound: format!("{bound:.3e}"),
            tol: format!("{tol:.3e}"),
        });
    }
    Ok(())
}

/// `theta_q(Q) = sum_{d in Z} q^{d(d-1)/2} Q^d` over the window `[-m, m]`.
pub fn theta_eval(q: &ComplexAP, qq: &ComplexAP, m: i64, tol: f64) -> Result<ComplexAP> {
    check_window(q, qq, m, tol)?;
    ThetaWindow::new(q, m).eval(qq)
}

/// Gaussian saddle profile of the window sum at nome `q = e^{-eps}` and
/// argument `Q = e^w`: estimates of `ln |theta|` and of the largest term,
/// and the index of that term, all in nats. The gap between the two
/// magnitudes is the cancellation the sum suffers; off the positive real
/// axis it grows like `(Im w)^2 / (2 eps)` as `q` approaches 1, so both the
/// working precision and the tail target must be sized from it.
fn theta_log_profile(eps: (f64, f64), w: (f64, f64)) -> (f64, f64, f64) {
    let s = (w.0 + eps.0 / 2.0, w.1 + eps.1 / 2.0);
    let s2 = (s.0 * s.0 - s.1 * s.1, 2.0 * s.0 * s.1);
    let norm = 2.0 * (eps.0 * eps.0 + eps.1 * eps.1);
    let e_theta = (s2.0 * eps.0 + s2.1 * eps.1) / norm;
    let saddle = s.0 / eps.0;
    let e_max = s.0 * s.0 / (2.0 * eps.0);
    (e_theta, e_max, saddle)
}

/// Smallest half-width `m >= m_start` whose boundary term satisfies
/// `(m(m-1)/2) ln|q| + m growth < target` nats. Log-domain counterpart of
/// [`theta_auto_window`] for targets far outside f64 range; `m_start` must
/// lie at or past the largest term, where the boundary term decreases.
fn window_for_log_tail(decay: f64, growth: f64, target: f64, m_start: i64) -> Result<i64> {
    let bound = |m: i64| (m * (m - 1)) as f64 / 2.0 * decay + m as f64 * growth;
    for m in m_start.max(2)..=WINDOW_CAP {
        if bound(m) < target {
            return Ok(m);
        }
    }
    Err(Error::WindowTooSmall {
        m: WINDOW_CAP,
        bound: format!("exp({:.1})", bound(WINDOW_CAP)),
        tol: format!("exp({target:.1})"),
    })
}

/// Guard against the zero set of theta, which is `-q^Z`: rejects `Q` within
/// relative distance 1e-3 of any nearby zero.
fn guard_theta_zero(q: &ComplexAP, qq: &ComplexAP) -> Result<()> {
    let qq_abs = qq.abs().to_f64();
    let q_abs = q.abs().to_f64();
    if qq_abs == 0.0 {
        return Err(Error::ZeroBase);
    }
    let k0 = (qq_abs.ln() / q_abs.ln()).round() as i64;
    for k in (k0 - 2)..=(k0 + 2) {
        let zero = q.pow_i64(k)?.neg_c();
        if qq.dist(&zero).to_f64() < 1e-3 * qq_abs {
            return Err(Error::NearThetaZero(format!(
                "Q within 1e-3 relative distance of -q^{k}"
            )));
        }
    }
    Ok(())
}

/// q-logarithm `ell_q(Q) = -Q theta'(Q) / theta(Q)`, both sums taken from one
/// shared window.
pub fn ell_q_eval(q: &ComplexAP, qq: &ComplexAP, m: i64, tol: f64) -> Result<ComplexAP> {
    check_window(q, qq, m, tol)?;
    ell_q_window(q, qq, m)
}

fn ell_q_window(q: &ComplexAP, qq: &ComplexAP, m: i64) -> Result<ComplexAP> {
    guard_theta_zero(q, qq)?;
    let (theta, euler) = ThetaWindow::new(q, m).eval_with_euler(qq)?;
    // Off the positive real axis theta is exponentially small as q -> 1
    // without being noise; rescale both sums by one exact power of two so
    // the negligibility guard in the division sees O(1) magnitudes.
    let (theta, euler) = match theta.abs().get_exp() {
        Some(e) if e < 0 => {
            let f = rug::Float::with_val(theta.prec(), rug::Float::i_exp(1, -e));
            (theta.mul_float(&f), euler.mul_float(&f))
        }
        _ => (theta, euler),
    };
    Ok(euler.div_c(&theta)?.neg_c())
}

/// q-character `e_{q,lambda}(Q) = theta(Q) / theta(lambda Q)`.
pub fn e_q_char(q: &ComplexAP, lambda: &ComplexAP, qq: &ComplexAP, tol: f64) -> Result<ComplexAP> {
    if lambda.is_negligible() {
        return Err(Error::ZeroBase);
    }
    let lq = lambda.clone() * qq;
    guard_theta_zero(q, &lq)?;
    let m = theta_auto_window(q, qq, tol)?.max(theta_auto_window(q, &lq, tol)?);
    let w = ThetaWindow::new(q, m);
    let num = w.eval(qq)?;
    let den = w.eval(&lq)?;
    num.div_c(&den)
}

/// True when `Q` lies on the spiral `(-1) q0^R` (for real `q0` in (0,1): the
/// negative real axis), where the q-log limit has no principal value.
pub fn on_log_spiral(q0: &ComplexAP, qq: &ComplexAP) -> Result<bool> {
    if qq.is_negligible() {
        return Err(Error::ZeroBase);
    }
    let w = qq.neg_c().ln()?;
    let u = q0.ln()?;
    let prec = qq.prec();
    for m in -2..=2i64 {
        let two_pi_m = ComplexAP::new(
            prec,
            rug::Float::with_val(prec, 0),
            rug::Float::with_val(prec, rug::float::Constant::Pi) * (2 * m),
        );
        let s = (w.clone() - &two_pi_m).div_c(&u)?;
        if s.im().to_f64().abs() < 1e-9 {
            return Ok(true);
        }
    }
    Ok(false)
}

const LIMIT_EVAL_TOL: f64 = 1e-25;

fn raise_prec(x: &ComplexAP, prec: u32) -> ComplexAP {
    if prec <= x.prec() {
        x.clone()
    } else {
        ComplexAP::new(prec, x.re().clone(), x.im().clone())
    }
}

/// For each `t` in `t_list`, the deviation `|(q0^t - 1) ell_{q0^t}(Q) - Log Q|`
/// with the principal logarithm.
///
/// The theta window at `q0^t` is sized per `t` from the saddle profile, and
/// the working precision is raised to absorb the cancellation the sum
/// suffers off the positive real axis; at `t = 2^{-12}` and `arg Q = pi/4`
/// that loss already exceeds 2500 bits.
pub fn q_log_limit_check(
    q0: &ComplexAP,
    qq: &ComplexAP,
    t_list: &[f64],
) -> Result<Vec<(f64, f64)>> {
    if on_log_spiral(q0, qq)? {
        return Err(Error::SpiralCut(
            "Q lies on the excluded spiral (-1) q0^R".into(),
        ));
    }
    let q0_abs = q0.abs().to_f64();
    if q0.is_negligible() || !(q0_abs < 1.0) {
        return Err(Error::ModulusQNotLessThanOne(format!("|q0| = {q0_abs}")));
    }
    let base_prec = qq.prec();
    let u = q0.ln()?;
    let u = (u.re().to_f64(), u.im().to_f64());
    let w_c = qq.ln()?;
    let w = (w_c.re().to_f64(), w_c.im().to_f64());
    let rel_nats = -LIMIT_EVAL_TOL.ln();
    let mut out = Vec::with_capacity(t_list.len());
    for &t in t_list {
        if !(t > 0.0 && t <= 1.0) {
            return Err(Error::SpiralCut(format!("t = {t} outside (0, 1]")));
        }
        let eps = (-t * u.0, -t * u.1);
        let (e_theta, e_max, saddle) = theta_log_profile(eps, w);
        let loss = (e_max - e_theta).max(0.0);
        let margin =
            (0.5 * (2.0 * std::f64::consts::PI / eps.0).ln()).max(0.0) + std::f64::consts::LN_10;
        let prec = base_prec.max(
            ((loss + rel_nats + 2.0 * margin) / std::f64::consts::LN_2).ceil() as u32 + 64,
        );
        let m_start = saddle.abs().ceil() as i64 + 1;
        let m = window_for_log_tail(-eps.0, w.0.abs(), e_theta - rel_nats - margin, m_start)?;
        let q0h = raise_prec(q0, prec);
        let qqh = raise_prec(qq, prec);
        let qt = principal_power(&q0h, &ComplexAP::from_f64(prec, t, 0.0))?;
        let ell = ell_q_window(&qt, &qqh, m)?;
        let one = qt.one_like();
        let err = ((qt - &one) * &ell - &qqh.ln()?).abs().to_f64();
        out.push((t, err));
    }
    Ok(out)
}

/// Coefficients (ascending in the log symbol) of
/// `(1/k!) L (L-1) ... (L-k+1)`, length `k + 1`.
pub fn log_binomial(k: u32) -> Vec<Rational> {
    let mut c = vec![Rational::one()];
    for r in 0..k {
        let mut next = vec![Rational::zero(); c.len() + 1];
        for (i, a) in c.iter().enumerate() {
            next[i + 1] = &next[i + 1] + a;
            next[i] = &next[i] - &(a * Rational::from_integer(r.into()));
        }
        c = next;
    }
    let mut fact = Rational::one();
    for r in 1..=k {
        fact = fact * Rational::from_integer(r.into());
    }
    c.into_iter().map(|a| a / &fact).collect()
}

/// `log_binomial(k)` lifted to a log-polynomial whose coefficients are
/// constant series.
pub fn log_binomial_poly<S: Scalar>(k: u32, trunc: i64, proto: &S) -> LogPoly<S> {
    let coeffs = log_binomial(k);
    let terms = coeffs
        .iter()
        .map(|c| TruncSeries::constant(proto.from_rational(c), trunc))
        .collect();
    LogPoly::from_terms(terms)
}
