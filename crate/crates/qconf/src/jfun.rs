//! Builders for the four J-function series of P^N, the coefficient families
//! f_b and g_b, and the fundamental solution matrices assembled from them.

use num_traits::One;

use crate::error::{Error, Result};
use crate::rings::{CohClassNonEq, KClassNonEq};
use crate::scalar::{Rational, Scalar};
use crate::series::{LogPoly, TruncSeries};
use crate::specfun::log_binomial;

/// One column of the equivariant K-theoretic J-function. The stored series
/// S_i is the part after the character prefactor; the prefactor itself never
/// gets expanded, only its shift rule survives: applying the Q-shift to the
/// full column multiplies the stored series by `sigma_mult` (= Lambda_i^{-1})
/// on top of the plain shift.
#[derive(Debug, Clone)]
pub struct EqColumn<S: Scalar> {
    pub sigma_mult: S,
    pub series: TruncSeries<S>,
}

/// The equivariant K-theoretic J-function in the fixed-point basis.
#[derive(Debug, Clone)]
pub struct JSeriesEq<S: Scalar> {
    pub lambdas: Vec<S>,
    pub columns: Vec<EqColumn<S>>,
}

impl<S: Scalar> JSeriesEq<S> {
    pub fn n(&self) -> usize {
        self.lambdas.len() - 1
    }
}

/// Column i has Q^d coefficient 1 / prod_j prod_{r=1..d} (1 - q^r Lambda_j
/// Lambda_i^{-1}); its prefactor contributes the shift multiplier
/// Lambda_i^{-1}.
pub fn build_jk_eq<S: Scalar>(q: &S, lambdas: &[S], d_max: i64) -> Result<JSeriesEq<S>> {
    assert!(lambdas.len() >= 2, "need at least two fixed points");
    let mut columns = Vec::with_capacity(lambdas.len());
    for (i, li) in lambdas.iter().enumerate() {
        let li_inv = li
            .inv()
            .map_err(|_| Error::ResonantParameters(format!("Lambda_{i} is not invertible")))?;
        let mut coeffs = Vec::with_capacity(d_max as usize + 1);
        let mut c = q.one_like();
        coeffs.push(c.clone());
        let mut qpow = q.one_like();
        for d in 1..=d_max {
            qpow = qpow * q;
            for (j, lj) in lambdas.iter().enumerate() {
                let factor = q.one_like() - &(qpow.clone() * lj * &li_inv);
                let finv = factor.inv().map_err(|_| {
                    Error::ResonantParameters(format!(
                        "1 - q^{d} Lambda_{j} / Lambda_{i} vanishes"
                    ))
                })?;
                c = c * &finv;
            }
            coeffs.push(c.clone());
        }
        columns.push(EqColumn {
            sigma_mult: li_inv,
            series: TruncSeries::from_coeffs(0, coeffs, d_max, q),
        });
    }
    Ok(JSeriesEq {
        lambdas: lambdas.to_vec(),
        columns,
    })
}

/// One fixed-point component of the equivariant cohomological J-function.
/// The prefactor Q^{lambda_i / z} stays symbolic; the Euler operator Q d/dQ
/// acting on the full column adds `marker_exponent` (= lambda_i / z) to the
/// plain Euler action on the stored series.
#[derive(Debug, Clone)]
pub struct CohEqColumn<S: Scalar> {
    pub marker_exponent: S,
    pub series: TruncSeries<S>,
}

#[derive(Debug, Clone)]
pub struct JSeriesCohEq<S: Scalar> {
    pub lambdas: Vec<S>,
    pub z: S,
    pub columns: Vec<CohEqColumn<S>>,
}

impl<S: Scalar> JSeriesCohEq<S> {
    pub fn n(&self) -> usize {
        self.lambdas.len() - 1
    }
}

/// Fixed-point value i has Q^d coefficient
/// prod_{r=1..d} prod_j 1/(lambda_i - lambda_j + r z).
pub fn build_jcoh_eq<S: Scalar>(lambdas: &[S], z: &S, d_max: i64) -> Result<JSeriesCohEq<S>> {
    assert!(lambdas.len() >= 2, "need at least two fixed points");
    let zinv = z
        .inv()
        .map_err(|_| Error::ResonantParameters("z = 0".into()))?;
    let mut columns = Vec::with_capacity(lambdas.len());
    for (i, li) in lambdas.iter().enumerate() {
        let mut coeffs = Vec::with_capacity(d_max as usize + 1);
        let mut c = z.one_like();
        coeffs.push(c.clone());
        let mut rz = z.zero_like();
        for r in 1..=d_max {
            rz = rz + z;
            for (j, lj) in lambdas.iter().enumerate() {
                let factor = li.clone() - lj + &rz;
                let finv = factor.inv().map_err(|_| {
                    Error::ResonantParameters(format!(
                        "lambda_{i} - lambda_{j} + {r} z vanishes"
                    ))
                })?;
                c = c * &finv;
            }
            coeffs.push(c.clone());
        }
        columns.push(CohEqColumn {
            marker_exponent: li.clone() * &zinv,
            series: TruncSeries::from_coeffs(0, coeffs, d_max, z),
        });
    }
    Ok(JSeriesCohEq {
        lambdas: lambdas.to_vec(),
        z: z.clone(),
        columns,
    })
}

/// The non-equivariant K-theoretic J-function: a log-polynomial whose series
/// coefficients are K-classes mod pi^{N+1}.
#[derive(Debug, Clone)]
pub struct JSeriesNonEq<S: Scalar> {
    pub n: usize,
    pub value: LogPoly<KClassNonEq<S>>,
}

/// The P^{-L} prefactor sum_{k<=n} (-1)^k binom(L, k) pi^k as a log-polynomial
/// of constant K-class series.
fn k_prefactor<S: Scalar>(q: &S, n: usize, d_max: i64) -> LogPoly<KClassNonEq<S>> {
    let binoms: Vec<Vec<Rational>> = (0..=n as u32).map(log_binomial).collect();
    let mut terms = Vec::with_capacity(n + 1);
    for a in 0..=n {
        let mut class = KClassNonEq::zero(n, q);
        for (k, row) in binoms.iter().enumerate().skip(a) {
            let mut v = q.from_rational(&row[a]);
            if k % 2 == 1 {
                v = -v;
            }
            class = class + &KClassNonEq::generator_power(n, k, q).mul_scalar(&v);
        }
        terms.push(TruncSeries::constant(class, d_max));
    }
    LogPoly::from_terms(terms)
}

/// Hypergeometric part: Q^d coefficient is the inverse of
/// prod_{r=1..d} ((1-q^r) + q^r pi)^{n+1} mod pi^{n+1}.
fn k_hyper_sum<S: Scalar>(q: &S, n: usize, d_max: i64) -> Result<TruncSeries<KClassNonEq<S>>> {
    let mut coeffs = Vec::with_capacity(d_max as usize + 1);
    let mut h = KClassNonEq::unit(n, q);
    coeffs.push(h.clone());
    let mut qpow = q.one_like();
    for _ in 1..=d_max {
        qpow = qpow * q;
        let factor = KClassNonEq::new(
            (0..=n)
                .map(|k| match k {
                    0 => q.one_like() - &qpow,
                    1 => qpow.clone(),
                    _ => q.zero_like(),
                })
                .collect(),
        );
        let finv = factor.invert()?;
        let mut power = finv.clone();
        for _ in 1..=n {
            power = power * &finv;
        }
        h = h * &power;
        coeffs.push(h.clone());
    }
    let proto = KClassNonEq::zero(n, q);
    Ok(TruncSeries::from_coeffs(0, coeffs, d_max, &proto))
}

pub fn build_jk_noneq<S: Scalar>(q: &S, n: usize, d_max: i64) -> Result<JSeriesNonEq<S>> {
    let pref = k_prefactor(q, n, d_max);
    let hyper = k_hyper_sum(q, n, d_max)?;
    Ok(JSeriesNonEq {
        n,
        value: pref.mul_series(&hyper),
    })
}

/// The pi^i-components J_i of the non-equivariant J-function, each a scalar
/// log-polynomial series.
pub fn decompose_ji<S: Scalar>(j: &JSeriesNonEq<S>) -> Vec<LogPoly<S>> {
    (0..=j.n)
        .map(|i| {
            let terms: Vec<TruncSeries<S>> = j
                .value
                .terms()
                .iter()
                .map(|ts| {
                    let trunc = ts.trunc();
                    let proto = ts.proto().coeff(0).zero_like();
                    let coeffs: Vec<S> = (0..=trunc)
                        .map(|d| {
                            let class = ts.coeff(d);
                            class.coeff(i).clone()
                        })
                        .collect();
                    TruncSeries::from_coeffs(0, coeffs, trunc, &proto)
                })
                .collect();
            LogPoly::from_terms(terms)
        })
        .collect()
}

/// Multi-index part of f_b and g_b: given the elementary symmetric values
/// e_1..e_b of the weight sequence, sums (-1)^k (n+k)!/(n! j_1!...j_n!)
/// prod_l e_l^{j_l} over 0 <= j_l <= n with sum j_l = k <= n and
/// sum l j_l = b.
fn multi_index_sum<S: Scalar>(proto: &S, n: usize, b: usize, elem: &[S]) -> S {
    let mut total = proto.zero_like();
    let mut j = vec![0usize; n + 1];
    dfs_multi_index(proto, n, elem, 1, b, 0, &mut j, &mut total);
    total
}

#[allow(clippy::too_many_arguments)]
fn dfs_multi_index<S: Scalar>(
    proto: &S,
    n: usize,
    elem: &[S],
    l: usize,
    rem_weight: usize,
    k_so_far: usize,
    j: &mut Vec<usize>,
    total: &mut S,
) {
    if rem_weight == 0 {
        let k = k_so_far;
        if k > n {
            return;
        }
        let mut num = Rational::one();
        for t in 1..=k {
            num = num * Rational::from_integer(((n + t) as i64).into());
        }
        for &jl in j.iter() {
            for t in 1..=jl {
                num = num / Rational::from_integer((t as i64).into());
            }
        }
        let mut term = proto.from_rational(&num);
        if k % 2 == 1 {
            term = -term;
        }
        for (l, &jl) in j.iter().enumerate() {
            for _ in 0..jl {
                term = term * &elem[l];
            }
        }
        *total = total.clone() + &term;
        return;
    }
    if l > n || l > rem_weight {
        return;
    }
    let max_jl = (rem_weight / l).min(n);
    for jl in 0..=max_jl {
        if k_so_far + jl > n {
            break;
        }
        j[l] = jl;
        dfs_multi_index(proto, n, elem, l + 1, rem_weight - l * jl, k_so_far + jl, j, total);
    }
    j[l] = 0;
}

/// Shared engine for f_b and g_b: Q^d coefficient is outer(d) times the
/// multi-index sum over elementary symmetric functions of weight(1..d).
fn coefficient_family<S: Scalar>(
    proto: &S,
    n: usize,
    b: usize,
    d_max: i64,
    mut weight: impl FnMut(i64) -> Result<S>,
    mut outer: impl FnMut(i64) -> Result<S>,
) -> Result<TruncSeries<S>> {
    assert!(b <= n, "b ranges over 0..=N");
    // elem[l] = e_l(x_1..x_d), updated incrementally in d
    let mut elem: Vec<S> = vec![proto.zero_like(); b + 1];
    elem[0] = proto.one_like();
    let mut coeffs = Vec::with_capacity(d_max as usize + 1);
    for d in 0..=d_max {
        if d > 0 {
            let x = weight(d)?;
            for l in (1..=b).rev() {
                elem[l] = elem[l].clone() + &(elem[l - 1].clone() * &x);
            }
        }
        let inner = multi_index_sum(proto, n, b, &elem);
        coeffs.push(outer(d)? * &inner);
    }
    Ok(TruncSeries::from_coeffs(0, coeffs, d_max, proto))
}

/// f_b: Q^d coefficient (1/(q;q)_d^{n+1}) times the multi-index sum with
/// weights x_m = q^m/(1-q^m).
pub fn f_b<S: Scalar>(q: &S, n: usize, b: usize, d_max: i64) -> Result<TruncSeries<S>> {
    let mut qpow_w = q.one_like();
    let q1 = q.clone();
    let weight = move |_d: i64| {
        qpow_w = qpow_w.clone() * &q1;
        let den = q1.one_like() - &qpow_w;
        Ok(qpow_w.clone() * &den.inv()?)
    };
    let mut qpow_o = q.one_like();
    let mut poch_inv = q.one_like();
    let q2 = q.clone();
    let outer = move |d: i64| {
        if d > 0 {
            qpow_o = qpow_o.clone() * &q2;
            let f = (q2.one_like() - &qpow_o).inv()?;
            let mut p = f.clone();
            for _ in 0..n {
                p = p * &f;
            }
            poch_inv = poch_inv.clone() * &p;
        }
        Ok(poch_inv.clone())
    };
    coefficient_family(q, n, b, d_max, weight, outer)
}

/// g_b: Q^d coefficient (1/(z^d d!)^{n+1}) (1/z^b) times the multi-index sum
/// with weights x_m = 1/m.
pub fn g_b<S: Scalar>(z: &S, n: usize, b: usize, d_max: i64) -> Result<TruncSeries<S>> {
    let proto = z.one_like();
    let weight = {
        let proto = proto.clone();
        move |d: i64| Ok(proto.from_rational(&Rational::new(1.into(), d.into())))
    };
    let zinv = z.inv()?;
    let zb_inv = zinv.pow_i64(b as i64)?;
    let mut dfac_zd_inv = z.one_like();
    let zinv2 = zinv.clone();
    let outer = move |d: i64| {
        if d > 0 {
            let f = zinv2.clone()
                * &zinv2.from_rational(&Rational::new(1.into(), d.into()));
            let mut p = f.clone();
            for _ in 0..n {
                p = p * &f;
            }
            dfac_zd_inv = dfac_zd_inv.clone() * &p;
        }
        Ok(dfac_zd_inv.clone() * &zb_inv)
    };
    coefficient_family(&proto, n, b, d_max, weight, outer)
}

/// The non-equivariant cohomological J-function. Assembled two ways: from the
/// g_b with powers of the log symbol, and by direct expansion of
/// Q^{H/z} prod (H + rz)^{-(N+1)}; exact builds assert the routes agree.
pub fn build_jcoh_noneq<S: Scalar>(
    z: &S,
    n: usize,
    d_max: i64,
) -> Result<LogPoly<CohClassNonEq<S>>> {
    let zinv = z.inv()?;
    let class_proto = CohClassNonEq::zero(n, z);

    // Route 1: sum_i H^i sum_{a+b=i} (1/a!) (L/z)^a g_b
    let mut terms: Vec<TruncSeries<CohClassNonEq<S>>> = Vec::with_capacity(n + 1);
    let mut a_fact = Rational::one();
    for a in 0..=n {
        if a > 0 {
            a_fact = a_fact * Rational::from_integer((a as i64).into());
        }
        let factor = zinv.pow_i64(a as i64)?
            * &z.from_rational(&(Rational::one() / &a_fact));
        let mut term = TruncSeries::zero(&class_proto, d_max);
        for b in 0..=(n - a) {
            let gb = g_b(z, n, b, d_max)?;
            let coeffs: Vec<CohClassNonEq<S>> = (0..=d_max)
                .map(|d| {
                    CohClassNonEq::generator_power(n, a + b, z)
                        .mul_scalar(&(gb.coeff(d) * &factor))
                })
                .collect();
            term = term.add(&TruncSeries::from_coeffs(0, coeffs, d_max, &class_proto));
        }
        terms.push(term);
    }
    let route1 = LogPoly::from_terms(terms);

    // Route 2: expand Q^{H/z} prod_{r<=d} (H + rz)^{-(n+1)} directly
    let mut pref_terms = Vec::with_capacity(n + 1);
    let mut a_fact = Rational::one();
    for a in 0..=n {
        if a > 0 {
            a_fact = a_fact * Rational::from_integer((a as i64).into());
        }
        let v = zinv.pow_i64(a as i64)?
            * &z.from_rational(&(Rational::one() / &a_fact));
        pref_terms.push(TruncSeries::constant(
            CohClassNonEq::generator_power(n, a, z).mul_scalar(&v),
            d_max,
        ));
    }
    let pref = LogPoly::from_terms(pref_terms);
    let mut coeffs = Vec::with_capacity(d_max as usize + 1);
    let mut h = CohClassNonEq::unit(n, z);
    coeffs.push(h.clone());
    let mut rz = z.zero_like();
    for _ in 1..=d_max {
        rz = rz + z;
        let factor = CohClassNonEq::new(
            (0..=n)
                .map(|k| match k {
                    0 => rz.clone(),
                    1 => z.one_like(),
                    _ => z.zero_like(),
                })
                .collect(),
        );
        let finv = factor.invert()?;
        let mut power = finv.clone();
        for _ in 1..=n {
            power = power * &finv;
        }
        h = h * &power;
        coeffs.push(h.clone());
    }
    let hyper = TruncSeries::from_coeffs(0, coeffs, d_max, &class_proto);
    let route2 = pref.mul_series(&hyper);

    if S::EXACT {
        assert!(
            route1 == route2,
            "g_b assembly disagrees with the direct product expansion"
        );
    }
    Ok(route2)
}

/// Equivariant fundamental matrix: entry (l, i) is the l-fold twisted delta
/// of pullbacked column i. The character prefactors are not expanded; their
/// shift multipliers ride along in `sigma_mults`.
#[derive(Debug, Clone)]
pub struct FundamentalMatrixEq<S: Scalar> {
    pub scale: S,
    pub sigma_mults: Vec<S>,
    pub entries: Vec<Vec<TruncSeries<S>>>,
}

/// Rows are built by the twisted delta ((mult sigma - id)/(q - 1)); columns
/// are the J-columns with Q scaled by ((1-q)/z)^{N+1}.
pub fn build_fundamental_eq<S: Scalar>(
    j: &JSeriesEq<S>,
    q: &S,
    z: &S,
) -> Result<FundamentalMatrixEq<S>> {
    let n = j.n();
    let scale = ((q.one_like() - q) * &z.inv()?).pow_i64(n as i64 + 1)?;
    let row0: Vec<TruncSeries<S>> = j
        .columns
        .iter()
        .map(|col| col.series.scale_q(&scale))
        .collect();
    let mut entries = vec![row0];
    for _ in 0..n {
        let prev = entries.last().unwrap();
        let next: Vec<TruncSeries<S>> = prev
            .iter()
            .zip(&j.columns)
            .map(|(s, col)| s.delta_q_twisted(q, &col.sigma_mult))
            .collect::<Result<_>>()?;
        entries.push(next);
    }
    Ok(FundamentalMatrixEq {
        scale,
        sigma_mults: j.columns.iter().map(|c| c.sigma_mult.clone()).collect(),
        entries,
    })
}

/// Non-equivariant fundamental matrix: entry (l, i) is the l-fold delta of
/// the pullbacked branch J_i.
#[derive(Debug, Clone)]
pub struct FundamentalMatrixNonEq<S: Scalar> {
    pub scale: S,
    pub entries: Vec<Vec<LogPoly<S>>>,
}

pub fn build_fundamental_noneq<S: Scalar>(
    j: &JSeriesNonEq<S>,
    q: &S,
    z: &S,
) -> Result<FundamentalMatrixNonEq<S>> {
    let n = j.n;
    let scale = ((q.one_like() - q) * &z.inv()?).pow_i64(n as i64 + 1)?;
    let row0: Vec<LogPoly<S>> = decompose_ji(j)
        .iter()
        .map(|ji| ji.scale_q(&scale))
        .collect();
    let mut entries = vec![row0];
    for _ in 0..n {
        let prev = entries.last().unwrap();
        let next: Vec<LogPoly<S>> = prev
            .iter()
            .map(|s| s.delta(q))
            .collect::<Result<_>>()?;
        entries.push(next);
    }
    Ok(FundamentalMatrixNonEq { scale, entries })
}
