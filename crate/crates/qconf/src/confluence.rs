//! Solution-level confluence: the change of fundamental solution applied to
//! the K-theoretic J-series, the coefficientwise t -> 0 limits of the
//! transformed solutions, and the comparison with the cohomological
//! J-functions through the gamma maps.

use num_traits::One;

use crate::error::{Error, Result};
use crate::jfun::{
    build_fundamental_eq, build_fundamental_noneq, build_jcoh_eq, build_jcoh_noneq, build_jk_eq,
    build_jk_noneq, f_b, g_b, CohEqColumn, EqColumn, FundamentalMatrixEq, FundamentalMatrixNonEq,
    JSeriesCohEq,
};
use crate::rings::{gamma_eq, gamma_noneq, CohClassNonEq, KClassEq, KClassNonEq};
use crate::scalar::{principal_power, ComplexAP, Rational, Scalar};
use crate::series::{LogPoly, TruncSeries};
use crate::specfun::log_binomial;

/// Equivariant solution after the change of fundamental solution: the same
/// character markers as the fundamental matrix, now attached to the plain
/// argument, with series rebuilt from the closed form
/// sum_d scale^d Q^d / prod_j (q Lambda_j Lambda_i^{-1}; q)_d.
#[derive(Debug, Clone)]
pub struct TransformedSolutionEq<S: Scalar> {
    pub q: S,
    pub z: S,
    pub scale: S,
    pub columns: Vec<EqColumn<S>>,
}

impl<S: Scalar> TransformedSolutionEq<S> {
    /// Entry (l, i) of the transformed matrix: the l-fold twisted delta of
    /// column i.
    pub fn entry(&self, l: usize, i: usize) -> Result<TruncSeries<S>> {
        let mut s = self.columns[i].series.clone();
        for _ in 0..l {
            s = s.delta_q_twisted(&self.q, &self.columns[i].sigma_mult)?;
        }
        Ok(s)
    }
}

/// The change of fundamental solution on the equivariant side. Its effect on
/// the stored data: markers keep their shift multipliers, and each series is
/// the pullbacked hypergeometric sum. Exact builds check the rebuild against
/// the fundamental matrix row it must coincide with.
pub fn transform_eq<S: Scalar>(
    x: &FundamentalMatrixEq<S>,
    q: &S,
    z: &S,
) -> Result<TransformedSolutionEq<S>> {
    let n = x.sigma_mults.len() - 1;
    let trunc = x.entries[0][0].trunc();
    let scale = ((q.one_like() - q) * &z.inv()?).pow_i64(n as i64 + 1)?;
    if S::EXACT {
        assert!(scale == x.scale, "pullback scale disagrees with the matrix");
    }
    let mut columns = Vec::with_capacity(n + 1);
    for (i, mult) in x.sigma_mults.iter().enumerate() {
        // ratio j: the shift multiplier Lambda_j Lambda_i^{-1}
        let mut ratios = Vec::with_capacity(n + 1);
        for (j, mj) in x.sigma_mults.iter().enumerate() {
            let mj_inv = mj.inv().map_err(|_| {
                Error::ResonantParameters(format!("Lambda_{j} is not invertible"))
            })?;
            ratios.push(mult.clone() * &mj_inv);
        }
        let mut coeffs = Vec::with_capacity(trunc as usize + 1);
        let mut c = q.one_like();
        coeffs.push(c.clone());
        let mut qpow = q.one_like();
        for d in 1..=trunc {
            qpow = qpow * q;
            c = c * &scale;
            for (j, ratio) in ratios.iter().enumerate() {
                let factor = q.one_like() - &(qpow.clone() * ratio);
                let finv = factor.inv().map_err(|_| {
                    Error::ResonantParameters(format!(
                        "1 - q^{d} Lambda_{j} / Lambda_{i} vanishes"
                    ))
                })?;
                c = c * &finv;
            }
            coeffs.push(c.clone());
        }
        let series = TruncSeries::from_coeffs(0, coeffs, trunc, q);
        if S::EXACT {
            assert!(
                series == x.entries[0][i],
                "closed form disagrees with the pullbacked column"
            );
        }
        columns.push(EqColumn {
            sigma_mult: mult.clone(),
            series,
        });
    }
    Ok(TransformedSolutionEq {
        q: q.clone(),
        z: z.clone(),
        scale,
        columns,
    })
}

/// Non-equivariant solution after the transform: column i of the fundamental
/// matrix scaled by ((1-q)/z)^i and re-expressed through the (a, b)-split
/// into log-binomial parts times the series parts `b_parts`, whose limits
/// are the g_b.
#[derive(Debug, Clone)]
pub struct TransformedSolutionNonEq<S: Scalar> {
    pub q: S,
    pub z: S,
    pub n: usize,
    pub scale: S,
    /// ((1-q)/z)^b f_b(q, scale Q) for b = 0..=N
    pub b_parts: Vec<TruncSeries<S>>,
    /// column i = sum_{a+b=i} ((q-1)/z)^a binom(L, a) b_parts[b]
    pub columns: Vec<LogPoly<S>>,
}

pub fn transform_noneq<S: Scalar>(
    x: &FundamentalMatrixNonEq<S>,
    q: &S,
    z: &S,
) -> Result<TransformedSolutionNonEq<S>> {
    let n = x.entries[0].len() - 1;
    let trunc = x.entries[0][0].trunc();
    let omq_over_z = (q.one_like() - q) * &z.inv()?;
    let scale = omq_over_z.pow_i64(n as i64 + 1)?;
    if S::EXACT {
        assert!(scale == x.scale, "pullback scale disagrees with the matrix");
    }
    let mut b_parts = Vec::with_capacity(n + 1);
    for b in 0..=n {
        let f = f_b(q, n, b, trunc)?;
        b_parts.push(f.scale_q(&scale).mul_scalar(&omq_over_z.pow_i64(b as i64)?));
    }
    let neg = -omq_over_z.clone();
    let mut columns = Vec::with_capacity(n + 1);
    for i in 0..=n {
        let mut col = LogPoly::zero(&q.zero_like(), trunc);
        for a in 0..=i {
            let b = i - a;
            let pow_a = neg.pow_i64(a as i64)?;
            for (e, cf) in log_binomial(a as u32).iter().enumerate() {
                let c = pow_a.clone() * &q.from_rational(cf);
                col = col.add(&LogPoly::l_pow(e, b_parts[b].mul_scalar(&c)));
            }
        }
        if S::EXACT {
            let direct = x.entries[0][i].mul_scalar(&omq_over_z.pow_i64(i as i64)?);
            assert!(
                col == direct,
                "(a, b)-split disagrees with scaling column {i} directly"
            );
        }
        columns.push(col);
    }
    Ok(TransformedSolutionNonEq {
        q: q.clone(),
        z: z.clone(),
        n,
        scale,
        b_parts,
        columns,
    })
}

/// One tracked coefficient: its values along the t-grid against the target.
/// Errors are relative to the target unless the target is tiny.
#[derive(Debug, Clone)]
pub struct ReportRow {
    pub basis: usize,
    pub qdeg: i64,
    pub logdeg: usize,
    pub values: Vec<ComplexAP>,
    pub target: ComplexAP,
    pub errors: Vec<f64>,
    pub monotone: bool,
    pub pass: bool,
}

#[derive(Debug, Clone)]
pub struct ConvergenceReport {
    pub ts: Vec<f64>,
    pub rows: Vec<ReportRow>,
    pub verdict: bool,
}

impl ConvergenceReport {
    pub fn ensure_pass(&self) -> Result<()> {
        for r in &self.rows {
            if !r.pass {
                return Err(Error::NoConvergence(format!(
                    "coefficient (basis {}, Q^{}, log^{}) does not converge: errors {:?}",
                    r.basis, r.qdeg, r.logdeg, r.errors
                )));
            }
        }
        Ok(())
    }
}

pub(crate) fn relative_error(value: &ComplexAP, target: &ComplexAP) -> f64 {
    let t = target.abs().to_f64();
    let denom = if t > 1e-8 { t } else { 1.0 };
    value.dist(target).to_f64() / denom
}

/// Pass requires the last three errors non-increasing (waived once they sit
/// below a floor far under tol) and the final error under tol.
fn make_row(
    basis: usize,
    qdeg: i64,
    logdeg: usize,
    values: Vec<ComplexAP>,
    target: ComplexAP,
    tol: f64,
) -> ReportRow {
    let errors: Vec<f64> = values.iter().map(|v| relative_error(v, &target)).collect();
    let monotone = errors.windows(2).all(|w| w[1] <= w[0]);
    let m = errors.len();
    let floor = tol * 1e-6;
    let tail = m < 3
        || (errors[m - 3] >= errors[m - 2] && errors[m - 2] >= errors[m - 1])
        || (errors[m - 2] < floor && errors[m - 1] < floor);
    let pass = tail && errors[m - 1] < tol;
    ReportRow {
        basis,
        qdeg,
        logdeg,
        values,
        target,
        errors,
        monotone,
        pass,
    }
}

/// Coefficientwise limits of transformed equivariant solutions along a
/// decreasing t-grid. Targets are the closed-form products
/// prod_{r<=d} prod_j 1/(lambda_i - lambda_j + r z); the assembled limit
/// carries the markers as the exponents lambda_i / z.
pub fn limit_eq(
    ts: &[f64],
    snaps: &[TransformedSolutionEq<ComplexAP>],
    lambdas: &[ComplexAP],
    z: &ComplexAP,
    tol: f64,
) -> Result<(ConvergenceReport, JSeriesCohEq<ComplexAP>)> {
    assert_eq!(ts.len(), snaps.len(), "one snapshot per t");
    assert!(ts.windows(2).all(|w| w[1] < w[0]), "t-grid must decrease");
    let trunc = snaps[0].columns[0].series.trunc();
    let coh = build_jcoh_eq(lambdas, z, trunc)?;
    let mut rows = Vec::new();
    for i in 0..lambdas.len() {
        for d in 0..=trunc {
            let values: Vec<ComplexAP> = snaps
                .iter()
                .map(|s| s.columns[i].series.coeff(d))
                .collect();
            rows.push(make_row(i, d, 0, values, coh.columns[i].series.coeff(d), tol));
        }
    }
    let verdict = rows.iter().all(|r| r.pass);
    let report = ConvergenceReport {
        ts: ts.to_vec(),
        rows,
        verdict,
    };
    let zinv = z.inv()?;
    let last = snaps.last().unwrap();
    let columns = lambdas
        .iter()
        .enumerate()
        .map(|(i, li)| CohEqColumn {
            marker_exponent: li.clone() * &zinv,
            series: last.columns[i].series.clone(),
        })
        .collect();
    Ok((
        report,
        JSeriesCohEq {
            lambdas: lambdas.to_vec(),
            z: z.clone(),
            columns,
        },
    ))
}

/// Per-(b, d) limits of the scaled f_b parts against the exact g_b targets,
/// plus the assembled class-valued limit pushed through gamma. The log parts
/// enter through the marker rule L^a / (a! z^a).
pub fn limit_noneq(
    ts: &[f64],
    snaps: &[TransformedSolutionNonEq<ComplexAP>],
    z: &ComplexAP,
    tol: f64,
) -> Result<(ConvergenceReport, LogPoly<CohClassNonEq<ComplexAP>>)> {
    assert_eq!(ts.len(), snaps.len(), "one snapshot per t");
    assert!(ts.windows(2).all(|w| w[1] < w[0]), "t-grid must decrease");
    let n = snaps[0].n;
    let trunc = snaps[0].b_parts[0].trunc();
    let mut rows = Vec::new();
    for b in 0..=n {
        let gb = g_b(z, n, b, trunc)?;
        for d in 0..=trunc {
            let values: Vec<ComplexAP> = snaps.iter().map(|s| s.b_parts[b].coeff(d)).collect();
            rows.push(make_row(b, d, 0, values, gb.coeff(d), tol));
        }
    }
    let verdict = rows.iter().all(|r| r.pass);
    let report = ConvergenceReport {
        ts: ts.to_vec(),
        rows,
        verdict,
    };

    // assemble sum_a L^a sum_b pi^{a+b} b_limit / (a! z^a), then pi -> H
    let last = snaps.last().unwrap();
    let zinv = z.inv()?;
    let class_proto = KClassNonEq::zero(n, z);
    let mut a_fact = Rational::one();
    let mut terms = Vec::with_capacity(n + 1);
    for a in 0..=n {
        if a > 0 {
            a_fact = a_fact * Rational::from_integer((a as i64).into());
        }
        let factor =
            zinv.pow_i64(a as i64)? * &z.from_rational(&(Rational::one() / &a_fact));
        let mut term = TruncSeries::zero(&class_proto, trunc);
        for b in 0..=(n - a) {
            let part = &last.b_parts[b];
            let coeffs: Vec<KClassNonEq<ComplexAP>> = (0..=trunc)
                .map(|d| {
                    KClassNonEq::generator_power(n, a + b, z)
                        .mul_scalar(&(part.coeff(d) * &factor))
                })
                .collect();
            term = term.add(&TruncSeries::from_coeffs(0, coeffs, trunc, &class_proto));
        }
        terms.push(term);
    }
    let k_limit = LogPoly::from_terms(terms);
    let coh_proto = CohClassNonEq::zero(n, z);
    let coh_terms: Vec<TruncSeries<CohClassNonEq<ComplexAP>>> = k_limit
        .terms()
        .iter()
        .map(|t| {
            let coeffs: Vec<_> = (0..=t.trunc()).map(|d| gamma_noneq(&t.coeff(d))).collect();
            TruncSeries::from_coeffs(0, coeffs, t.trunc(), &coh_proto)
        })
        .collect();
    Ok((report, LogPoly::from_terms(coh_terms)))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Variant {
    Eq,
    NonEq,
}

/// Final-limit comparison of one class coefficient with the independently
/// built cohomological J-function.
#[derive(Debug, Clone)]
pub struct GammaRow {
    pub basis: usize,
    pub qdeg: i64,
    pub logdeg: usize,
    pub value: ComplexAP,
    pub target: ComplexAP,
    pub error: f64,
}

#[derive(Debug)]
pub struct MainTheoremOutcome {
    pub report: ConvergenceReport,
    pub gamma_rows: Vec<GammaRow>,
    pub gamma_pass: bool,
    pub passed: bool,
}

/// lambda_i - lambda_j + r z must stay away from zero for i != j and
/// 1 <= r <= d_max; resonance poisons the closed-form targets, so it is
/// rejected before any limit is attempted.
fn ensure_nonresonant(lambdas: &[ComplexAP], z: &ComplexAP, d_max: i64) -> Result<()> {
    for (i, li) in lambdas.iter().enumerate() {
        for (j, lj) in lambdas.iter().enumerate() {
            if i == j {
                continue;
            }
            let mut rz = ComplexAP::zero(li.prec());
            for r in 1..=d_max {
                rz = rz + z;
                let v = li.clone() - lj + &rz;
                if v.abs().to_f64() < 1e-12 {
                    return Err(Error::ResonantParameters(format!(
                        "lambda_{i} - lambda_{j} + {r} z vanishes"
                    )));
                }
            }
        }
    }
    Ok(())
}

/// The whole pipeline: build the K-theoretic series at each q0^t, pull back,
/// transform, take coefficient limits, and compare the gamma-image of the
/// assembled limit with the cohomological side. `lambdas` must hold N+1
/// weights for the equivariant variant and is ignored otherwise.
#[allow(clippy::too_many_arguments)]
pub fn main_theorem_report(
    variant: Variant,
    n: usize,
    d_max: i64,
    q0: &ComplexAP,
    z: &ComplexAP,
    lambdas: &[ComplexAP],
    ts: &[f64],
    tol: f64,
) -> Result<MainTheoremOutcome> {
    assert!(!ts.is_empty(), "need at least one t");
    let prec = q0.prec();
    z.inv()
        .map_err(|_| Error::ResonantParameters("z = 0".into()))?;
    match variant {
        Variant::Eq => {
            assert_eq!(lambdas.len(), n + 1, "one weight per fixed point");
            ensure_nonresonant(lambdas, z, d_max)?;
            let zinv = z.inv()?;
            let mut snaps = Vec::with_capacity(ts.len());
            for &t in ts {
                let qt = q0.pow(&ComplexAP::from_f64(prec, t, 0.0))?;
                let big: Vec<ComplexAP> = lambdas
                    .iter()
                    .map(|l| principal_power(&qt, &-(l.clone() * &zinv)))
                    .collect::<Result<_>>()?;
                let j = build_jk_eq(&qt, &big, d_max)?;
                let x = build_fundamental_eq(&j, &qt, z)?;
                snaps.push(transform_eq(&x, &qt, z)?);
            }
            let (report, limit) = limit_eq(ts, &snaps, lambdas, z, tol)?;
            let coh = build_jcoh_eq(lambdas, z, d_max)?;
            let mut gamma_rows = Vec::new();
            for d in 0..=d_max {
                let kv = KClassEq::new(
                    limit.columns.iter().map(|c| c.series.coeff(d)).collect(),
                );
                let image = gamma_eq(&kv, lambdas)?;
                for i in 0..=n {
                    let value = image.value(i).clone();
                    let target = coh.columns[i].series.coeff(d);
                    let error = relative_error(&value, &target);
                    gamma_rows.push(GammaRow {
                        basis: i,
                        qdeg: d,
                        logdeg: 0,
                        value,
                        target,
                        error,
                    });
                }
            }
            gamma_rows.sort_by(|a, b| (a.basis, a.qdeg).cmp(&(b.basis, b.qdeg)));
            let markers_ok = limit
                .columns
                .iter()
                .zip(&coh.columns)
                .all(|(l, c)| l.marker_exponent.approx_eq(&c.marker_exponent, 1e-9));
            let gamma_pass = markers_ok && gamma_rows.iter().all(|r| r.error < tol);
            Ok(MainTheoremOutcome {
                passed: report.verdict && gamma_pass,
                report,
                gamma_rows,
                gamma_pass,
            })
        }
        Variant::NonEq => {
            let mut snaps = Vec::with_capacity(ts.len());
            for &t in ts {
                let qt = q0.pow(&ComplexAP::from_f64(prec, t, 0.0))?;
                let j = build_jk_noneq(&qt, n, d_max)?;
                let x = build_fundamental_noneq(&j, &qt, z)?;
                snaps.push(transform_noneq(&x, &qt, z)?);
            }
            let (report, limit) = limit_noneq(ts, &snaps, z, tol)?;
            let coh = build_jcoh_noneq(z, n, d_max)?;
            let mut gamma_rows = Vec::new();
            for a in 0..=n {
                let lt = limit.term(a).expect("limit term");
                let ct = coh.term(a).expect("coh term");
                for d in 0..=d_max {
                    let lv = lt.coeff(d);
                    let cv = ct.coeff(d);
                    for k in 0..=n {
                        let value = lv.coeff(k).clone();
                        let target = cv.coeff(k).clone();
                        let error = relative_error(&value, &target);
                        gamma_rows.push(GammaRow {
                            basis: k,
                            qdeg: d,
                            logdeg: a,
                            value,
                            target,
                            error,
                        });
                    }
                }
            }
            gamma_rows
                .sort_by(|a, b| (a.basis, a.qdeg, a.logdeg).cmp(&(b.basis, b.qdeg, b.logdeg)));
            let gamma_pass = gamma_rows.iter().all(|r| r.error < tol);
            Ok(MainTheoremOutcome {
                passed: report.verdict && gamma_pass,
                report,
                gamma_rows,
                gamma_pass,
            })
        }
    }
}
