//! End-to-end acceptance checks: exact annihilation of all four J-series,
//! the numeric functional equations of the special functions, and the
//! confluence of operators, solutions, and companion systems toward their
//! differential counterparts. Every test prints one summary line and holds a
//! wall-clock budget; tolerances are pinned below.

use std::time::{Duration, Instant};

use num_traits::{One, Zero};
use qconf::confluence::{main_theorem_report, Variant};
use qconf::jfun::{build_jcoh_eq, build_jcoh_noneq, build_jk_eq, build_jk_noneq, g_b};
use qconf::linalg::Mat;
use qconf::qop::{
    apply_diff_column, apply_diff_logpoly, apply_qdiff_column, apply_qdiff_logpoly,
    companion_diff, eq_delta_op_at, formal_limit, make_coh_operator, make_coh_operator_noneq,
    make_kth_operator, make_kth_operator_noneq, noneq_delta_op_at, PolyQ, RatQ,
};
use qconf::qsystems::{sauloy_confluence_check, sigma_system_from_delta_op, QSystem, SauloySetup};
use qconf::rings::{
    eta_to_monomial, gamma_eq, gamma_eq_inv, gamma_noneq, gamma_noneq_inv, CohClassNonEq,
    KClassEq, KClassNonEq,
};
use qconf::scalar::{ComplexAP, RatFunc, Rational, Scalar, Var};
use qconf::series::TruncSeries;
use qconf::specfun::{e_q_char, ell_q_eval, q_log_limit_check, theta_auto_window, theta_eval};
use qconf::Error;

const PREC: u32 = 256;
/// tail tolerance used to pick theta summation windows
const WINDOW_TOL: f64 = 1e-14;
const THETA_SHIFT_TOL: f64 = 1e-12;
const ELL_SHIFT_TOL: f64 = 1e-10;
const CHAR_SHIFT_TOL: f64 = 1e-10;
/// final-error bound shared by every confluence check
const LIMIT_TOL: f64 = 1e-3;
/// numeric values recomputed here from exact rationals may differ from the
/// library's only at rounding level, far below this
const RECOMPUTE_TOL: f64 = 1e-40;

fn rat(n: i64, d: i64) -> Rational {
    Rational::new(n.into(), d.into())
}

fn lib<T>(r: qconf::Result<T>) -> Result<T, String> {
    r.map_err(|e| e.to_string())
}

macro_rules! ensure {
    ($cond:expr, $($arg:tt)+) => {
        if !$cond {
            return Err(format!($($arg)+));
        }
    };
}

fn finish(label: &str, budget: Duration, started: Instant, outcome: Result<(), String>) {
    let elapsed = started.elapsed();
    let ok = outcome.is_ok() && elapsed <= budget;
    println!(
        "acceptance: {label} .. {} ({:.2}s)",
        if ok { "pass" } else { "FAIL" },
        elapsed.as_secs_f64()
    );
    if let Err(msg) = outcome {
        panic!("{label}: {msg}");
    }
    assert!(
        elapsed <= budget,
        "{label}: {:.2}s exceeds the {:?} budget",
        elapsed.as_secs_f64(),
        budget
    );
}

/// Splitmix-style generator; fixed seeds keep the randomized checks
/// reproducible.
struct Rng(u64);

impl Rng {
    fn next(&mut self) -> u64 {
        self.0 = self.0.wrapping_add(0x9e37_79b9_7f4a_7c15);
        let mut z = self.0;
        z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
        z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
        z ^ (z >> 31)
    }

    fn uniform(&mut self, lo: f64, hi: f64) -> f64 {
        let u = (self.next() >> 11) as f64 / (1u64 << 53) as f64;
        lo + (hi - lo) * u
    }

    fn int(&mut self, lo: i64, hi: i64) -> i64 {
        lo + (self.next() % ((hi - lo + 1) as u64)) as i64
    }

    fn rat(&mut self) -> Rational {
        rat(self.int(-9, 9), self.int(1, 9))
    }
}

/// A point off the negative real axis, where theta has its zeros.
fn off_axis_point(rng: &mut Rng, prec: u32) -> ComplexAP {
    let r = rng.uniform(0.4, 1.8);
    let phi = rng.uniform(-2.5, 2.5);
    ComplexAP::from_f64(prec, r * phi.cos(), r * phi.sin())
}

fn real(prec: u32, r: &Rational) -> ComplexAP {
    ComplexAP::real_from_rational(prec, r)
}

fn rel_to(value: &ComplexAP, oracle: &Rational) -> f64 {
    let oc = real(value.prec(), oracle);
    let d = value.dist(&oc).to_f64();
    let t = oc.abs().to_f64();
    if t > 1e-8 {
        d / t
    } else {
        d
    }
}

fn drift_to(value: &ComplexAP, oracle: &Rational) -> f64 {
    value.dist(&real(value.prec(), oracle)).to_f64()
}

/// prod_{r=1..d} prod_j (lambda_i - lambda_j + r z), inverted.
fn inverse_product(lams: &[Rational], z: &Rational, i: usize, d: i64) -> Rational {
    let mut acc = Rational::one();
    for r in 1..=d {
        let rz = z.clone() * Rational::from_integer(r.into());
        for lj in lams {
            acc *= lams[i].clone() - lj.clone() + rz.clone();
        }
    }
    acc.recip()
}

fn poly_mul_mod(a: &[Rational], b: &[Rational], m: usize) -> Vec<Rational> {
    let mut out = vec![Rational::zero(); m];
    for (i, ai) in a.iter().enumerate().take(m) {
        if Zero::is_zero(ai) {
            continue;
        }
        for (j, bj) in b.iter().enumerate().take(m - i) {
            out[i + j] += ai.clone() * bj.clone();
        }
    }
    out
}

/// power-series inverse mod x^m; a[0] must be nonzero
fn poly_inv_mod(a: &[Rational], m: usize) -> Vec<Rational> {
    let a0 = a[0].clone().recip();
    let mut out = vec![Rational::zero(); m];
    out[0] = a0.clone();
    for k in 1..m {
        let mut s = Rational::zero();
        for j in 1..=k {
            if j < a.len() {
                s += a[j].clone() * out[k - j].clone();
            }
        }
        out[k] = -(a0.clone() * s);
    }
    out
}

fn poly_pow_mod(a: &[Rational], e: usize, m: usize) -> Vec<Rational> {
    let mut out = vec![Rational::zero(); m];
    out[0] = Rational::one();
    for _ in 0..e {
        out = poly_mul_mod(&out, a, m);
    }
    out
}

/// Q^d coefficients of prod_{r<=d} (H + r z)^{-(n+1)} reduced mod H^{n+1}:
/// the independent route to the g_b values, one vector per degree.
fn hyper_coeffs(z: &Rational, n: usize, d_max: i64) -> Vec<Vec<Rational>> {
    let m = n + 1;
    let mut h = vec![Rational::zero(); m];
    h[0] = Rational::one();
    let mut out = vec![h.clone()];
    for d in 1..=d_max {
        let mut lin = vec![Rational::zero(); m];
        lin[0] = z.clone() * Rational::from_integer(d.into());
        if m > 1 {
            lin[1] = Rational::one();
        }
        let f = poly_pow_mod(&lin, n + 1, m);
        h = poly_mul_mod(&h, &poly_inv_mod(&f, m), m);
        out.push(h.clone());
    }
    out
}

#[test]
fn noneq_k_series_is_annihilated_exactly() {
    let t0 = Instant::now();
    let run = || -> Result<(), String> {
        let q = rat(1, 2);
        for n in 1..=3usize {
            let qcl = KClassNonEq::unit(n, &q).mul_scalar(&q);
            let op = make_kth_operator_noneq(&qcl, n);
            let sol = lib(build_jk_noneq(&q, n, 8))?.value;
            let res = lib(apply_qdiff_logpoly(&op, &sol))?;
            ensure!(res.is_zero(), "n = {n}: residual is not identically zero");
        }
        Ok(())
    };
    finish(
        "q-shift annihilation of the plain K-series",
        Duration::from_secs(30),
        t0,
        run(),
    );
}

#[test]
fn eq_k_columns_are_annihilated_symbolically() {
    let t0 = Instant::now();
    let run = || -> Result<(), String> {
        for n in 1..=2usize {
            let qv = RatFunc::var(Var::Q);
            let lams: Vec<RatFunc> = (0..=n)
                .map(|i| RatFunc::var(Var::LambdaK(i as u32)))
                .collect();
            let op = make_kth_operator(&qv, &lams);
            let j = lib(build_jk_eq(&qv, &lams, 6))?;
            for (i, col) in j.columns.iter().enumerate() {
                let res = lib(apply_qdiff_column(&op, col))?;
                ensure!(res.is_zero(), "n = {n}, column {i}: nonzero residual");
            }
        }
        Ok(())
    };
    finish(
        "symbolic q-shift annihilation of the fixed-point columns",
        Duration::from_secs(60),
        t0,
        run(),
    );
}

#[test]
fn coh_series_satisfy_their_differential_equations_exactly() {
    let t0 = Instant::now();
    let run = || -> Result<(), String> {
        let z = rat(5, 7);
        let weights = [rat(0, 1), rat(1, 3), rat(17, 21), rat(9, 5)];
        for n in 1..=3usize {
            let lams = &weights[..=n];
            let op = make_coh_operator(&z, lams);
            let sol = lib(build_jcoh_eq(lams, &z, 8))?;
            for (i, col) in sol.columns.iter().enumerate() {
                let res = lib(apply_diff_column(&op, col))?;
                ensure!(res.is_zero(), "n = {n}, column {i}: nonzero residual");
            }

            let zcl = CohClassNonEq::unit(n, &z).mul_scalar(&z);
            let opn = make_coh_operator_noneq(&zcl, n);
            let soln = lib(build_jcoh_noneq(&z, n, 8))?;
            let res = lib(apply_diff_logpoly(&opn, &soln))?;
            ensure!(res.is_zero(), "n = {n}: plain residual is not zero");
        }
        Ok(())
    };
    finish(
        "differential annihilation of the cohomological series",
        Duration::from_secs(10),
        t0,
        run(),
    );
}

#[test]
fn shift_identities_hold_at_random_points() {
    let t0 = Instant::now();
    let run = || -> Result<(), String> {
        let one = ComplexAP::one(PREC);

        let mut rng = Rng(0x7e1a_11eb_0001);
        for k in 0..20 {
            let q = ComplexAP::from_f64(PREC, rng.uniform(0.2, 0.8), 0.0);
            let qq = off_axis_point(&mut rng, PREC);
            let shifted = q.clone() * &qq;
            let m = lib(theta_auto_window(&q, &qq, WINDOW_TOL))?
                .max(lib(theta_auto_window(&q, &shifted, WINDOW_TOL))?);
            let th = lib(theta_eval(&q, &qq, m, WINDOW_TOL))?;
            let th_up = lib(theta_eval(&q, &shifted, m, WINDOW_TOL))?;
            let resid = (qq.clone() * &th_up).sub_c(&th).abs().to_f64();
            ensure!(
                resid < THETA_SHIFT_TOL,
                "theta point {k}: |Q theta(qQ) - theta(Q)| = {resid:.3e}"
            );
        }

        let mut rng = Rng(0x7e1a_11eb_0002);
        for k in 0..20 {
            let q = ComplexAP::from_f64(PREC, rng.uniform(0.2, 0.8), 0.0);
            let qq = off_axis_point(&mut rng, PREC);
            let shifted = q.clone() * &qq;
            let m = lib(theta_auto_window(&q, &qq, WINDOW_TOL))?
                .max(lib(theta_auto_window(&q, &shifted, WINDOW_TOL))?);
            let up = lib(ell_q_eval(&q, &shifted, m, WINDOW_TOL))?;
            let at = lib(ell_q_eval(&q, &qq, m, WINDOW_TOL))?;
            let resid = up.sub_c(&at).sub_c(&one).abs().to_f64();
            ensure!(
                resid < ELL_SHIFT_TOL,
                "q-log point {k}: |ell(qQ) - ell(Q) - 1| = {resid:.3e}"
            );
        }

        let mut rng = Rng(0x7e1a_11eb_0003);
        for k in 0..20 {
            let q = ComplexAP::from_f64(PREC, rng.uniform(0.2, 0.8), 0.0);
            let lam = ComplexAP::from_f64(PREC, rng.uniform(0.3, 2.2), 0.0);
            let qq = off_axis_point(&mut rng, PREC);
            let shifted = q.clone() * &qq;
            let up = lib(e_q_char(&q, &lam, &shifted, WINDOW_TOL))?;
            let at = lib(e_q_char(&q, &lam, &qq, WINDOW_TOL))?;
            let resid = up.sub_c(&(lam.clone() * &at)).abs().to_f64();
            ensure!(
                resid < CHAR_SHIFT_TOL,
                "q-character point {k}: |e(qQ) - lambda e(Q)| = {resid:.3e}"
            );
        }
        Ok(())
    };
    finish(
        "special-function shift identities at random points",
        Duration::from_secs(5),
        t0,
        run(),
    );
}

#[test]
fn scaled_q_log_converges_to_the_principal_log() {
    let t0 = Instant::now();
    let run = || -> Result<(), String> {
        let q0 = ComplexAP::from_f64(PREC, 0.5, 0.0);
        let ts: Vec<f64> = (1..=12).map(|k| 2f64.powi(-k)).collect();
        for (re, im) in [(2.0, 0.0), (1.0, 1.0), (0.3, 0.0)] {
            let qq = ComplexAP::from_f64(PREC, re, im);
            let rows = lib(q_log_limit_check(&q0, &qq, &ts))?;
            ensure!(rows.len() == ts.len(), "Q = {re}+{im}i: wrong row count");
            for w in rows.windows(2) {
                ensure!(
                    w[1].1 < w[0].1,
                    "Q = {re}+{im}i: error fails to decrease at t = {}",
                    w[1].0
                );
            }
            let last = rows.last().unwrap().1;
            ensure!(
                last < LIMIT_TOL,
                "Q = {re}+{im}i: final error {last:.3e} above {LIMIT_TOL:.0e}"
            );
        }
        Ok(())
    };
    finish(
        "scaled q-logarithm limit",
        Duration::from_secs(5),
        t0,
        run(),
    );
}

#[test]
fn delta_coefficients_converge_to_the_differential_operator() {
    let t0 = Instant::now();
    let run = || -> Result<(), String> {
        let ts = [1e-1, 1e-2, 1e-3, 1e-4];
        let q0 = ComplexAP::from_f64(PREC, 0.5, 0.0);
        let z = ComplexAP::one(PREC);
        let floor = LIMIT_TOL * 1e-6;

        let check = |name: &str, rep: &qconf::qop::FormalLimitReport| -> Result<(), String> {
            ensure!(rep.confluent, "{name}: coefficients did not converge");
            for c in &rep.coefficients {
                let last = *c.errors.last().unwrap();
                ensure!(
                    c.converged && last < LIMIT_TOL,
                    "{name}, delta^{}: final error {last:.3e}",
                    c.delta_power
                );
                ensure!(
                    c.errors
                        .windows(2)
                        .all(|w| w[1] <= w[0] || (w[0] < floor && w[1] < floor)),
                    "{name}, delta^{}: errors not decreasing: {:?}",
                    c.delta_power,
                    c.errors
                );
            }
            Ok(())
        };

        let target = make_coh_operator_noneq(&z, 2);
        let rep = lib(formal_limit(
            |t| {
                let qt = q0.pow(&ComplexAP::from_f64(PREC, t, 0.0))?;
                noneq_delta_op_at(&qt, 2, &z)
            },
            &ts,
            &target,
            LIMIT_TOL,
        ))?;
        check("plain N = 2", &rep)?;

        for lams_r in [vec![rat(0, 1), rat(1, 3)], vec![rat(0, 1), rat(1, 3), rat(17, 21)]] {
            let lams: Vec<ComplexAP> = lams_r.iter().map(|r| real(PREC, r)).collect();
            let target = make_coh_operator(&z, &lams);
            let rep = lib(formal_limit(
                |t| {
                    let qt = q0.pow(&ComplexAP::from_f64(PREC, t, 0.0))?;
                    eq_delta_op_at(&qt, &lams, &z)
                },
                &ts,
                &target,
                LIMIT_TOL,
            ))?;
            check(&format!("weighted N = {}", lams.len() - 1), &rep)?;
        }
        Ok(())
    };
    finish(
        "delta-coefficient confluence to the differential operator",
        Duration::from_secs(60),
        t0,
        run(),
    );
}

#[test]
fn eq_solution_limits_match_closed_form_products() {
    let t0 = Instant::now();
    let run = || -> Result<(), String> {
        let q0 = ComplexAP::from_f64(PREC, 0.5, 0.0);
        let z = ComplexAP::one(PREC);
        let zr = Rational::one();
        let lams_r = [rat(0, 1), rat(1, 3)];
        let lams: Vec<ComplexAP> = lams_r.iter().map(|r| real(PREC, r)).collect();
        let ts = [1e-1, 1e-2, 1e-3, 1e-4];
        let out = lib(main_theorem_report(
            Variant::Eq,
            1,
            3,
            &q0,
            &z,
            &lams,
            &ts,
            LIMIT_TOL,
        ))?;
        ensure!(out.report.verdict, "coefficient limits missed their targets");
        ensure!(out.gamma_pass, "gamma image disagrees with the cohomological series");
        ensure!(out.passed, "confluence report did not pass");

        // the named value, recomputed exactly
        ensure!(
            inverse_product(&lams_r, &zr, 0, 1) == rat(3, 2),
            "closed form at (i = 0, d = 1) must be 3/2"
        );
        for row in &out.report.rows {
            let oracle = inverse_product(&lams_r, &zr, row.basis, row.qdeg);
            ensure!(
                drift_to(&row.target, &oracle) < RECOMPUTE_TOL,
                "(i = {}, d = {}): library target drifts from the closed form",
                row.basis,
                row.qdeg
            );
            ensure!(row.pass, "(i = {}, d = {}): row failed", row.basis, row.qdeg);
            let rel = rel_to(row.values.last().unwrap(), &oracle);
            ensure!(
                rel < LIMIT_TOL,
                "(i = {}, d = {}): relative error {rel:.3e} at t = 1e-4",
                row.basis,
                row.qdeg
            );
        }

        let rcoh = lib(build_jcoh_eq(&lams_r, &zr, 3))?;
        for g in &out.gamma_rows {
            ensure!(
                g.error < LIMIT_TOL,
                "gamma (i = {}, d = {}): error {:.3e}",
                g.basis,
                g.qdeg,
                g.error
            );
            let rv = rcoh.columns[g.basis].series.coeff(g.qdeg);
            ensure!(
                drift_to(&g.target, &rv) < RECOMPUTE_TOL,
                "gamma (i = {}, d = {}): target drifts from the exact build",
                g.basis,
                g.qdeg
            );
        }
        Ok(())
    };
    finish(
        "equivariant solution confluence with gamma match",
        Duration::from_secs(120),
        t0,
        run(),
    );
}

#[test]
fn noneq_solution_limits_match_g_series() {
    let t0 = Instant::now();
    let run = || -> Result<(), String> {
        let q0 = ComplexAP::from_f64(PREC, 0.5, 0.0);
        let z = ComplexAP::one(PREC);
        let ts = [1e-1, 1e-2, 1e-3, 1e-4];
        let out = lib(main_theorem_report(
            Variant::NonEq,
            2,
            3,
            &q0,
            &z,
            &[],
            &ts,
            LIMIT_TOL,
        ))?;
        ensure!(out.report.verdict, "coefficient limits missed their targets");
        ensure!(out.gamma_pass, "gamma image disagrees with the cohomological series");
        ensure!(out.passed, "confluence report did not pass");

        // independent expansion of the degree coefficients, with the two
        // displayed degrees pinned outright
        let h = hyper_coeffs(&Rational::one(), 2, 3);
        ensure!(
            h[1] == vec![rat(1, 1), rat(-3, 1), rat(6, 1)],
            "d = 1 expansion must be (1, -3, 6)"
        );
        ensure!(
            h[2] == vec![rat(1, 8), rat(-9, 16), rat(3, 2)],
            "d = 2 expansion must be (1/8, -9/16, 3/2)"
        );

        for row in &out.report.rows {
            let oracle = &h[row.qdeg as usize][row.basis];
            ensure!(
                drift_to(&row.target, oracle) < RECOMPUTE_TOL,
                "(b = {}, d = {}): library target drifts from the expansion",
                row.basis,
                row.qdeg
            );
            ensure!(row.pass, "(b = {}, d = {}): row failed", row.basis, row.qdeg);
            let rel = rel_to(row.values.last().unwrap(), oracle);
            ensure!(
                rel < LIMIT_TOL,
                "(b = {}, d = {}): relative error {rel:.3e} at t = 1e-4",
                row.basis,
                row.qdeg
            );
        }

        let rcoh = lib(build_jcoh_noneq(&Rational::one(), 2, 3))?;
        for g in &out.gamma_rows {
            ensure!(
                g.error < LIMIT_TOL,
                "gamma (H^{}, d = {}, log^{}): error {:.3e}",
                g.basis,
                g.qdeg,
                g.logdeg,
                g.error
            );
            let class = rcoh
                .term(g.logdeg)
                .ok_or("missing log term in the exact build")?
                .coeff(g.qdeg);
            ensure!(
                drift_to(&g.target, class.coeff(g.basis)) < RECOMPUTE_TOL,
                "gamma (H^{}, d = {}, log^{}): target drifts from the exact build",
                g.basis,
                g.qdeg,
                g.logdeg
            );
        }
        Ok(())
    };
    finish(
        "plain solution confluence with gamma match",
        Duration::from_secs(120),
        t0,
        run(),
    );
}

#[test]
fn companion_family_passes_the_regularity_conditions() {
    let t0 = Instant::now();
    let run = || -> Result<(), String> {
        let q0 = ComplexAP::from_f64(PREC, 0.5, 0.0);
        let z = ComplexAP::one(PREC);
        let lams_r = [rat(0, 1), rat(1, 3)];
        let lams: Vec<ComplexAP> = lams_r.iter().map(|r| real(PREC, r)).collect();
        let ts = [1e-1, 1e-2, 1e-3, 1e-4, 1e-5];
        let samples = [
            ComplexAP::from_f64(PREC, 2.0, 0.0),
            ComplexAP::from_f64(PREC, 0.3, 0.0),
        ];
        let setup = SauloySetup {
            q0: q0.clone(),
            ts: &ts,
            samples: &samples,
            poles: &[],
            tol: LIMIT_TOL,
        };
        let rep = lib(sauloy_confluence_check(
            |qt| sigma_system_from_delta_op(&eq_delta_op_at(qt, &lams, &z)?),
            &setup,
        ))?;
        ensure!(rep.regular_singular, "limit system is not regular singular");
        ensure!(rep.nonresonant, "limit exponents are resonant");
        ensure!(rep.passed, "condition suite did not pass");

        // exponents of the limit are the weights over z
        for (k, lr) in lams_r.iter().enumerate() {
            ensure!(
                drift_to(&rep.exponents[k], lr) < LIMIT_TOL,
                "exponent {k} is not lambda_{k}/z"
            );
        }

        // B-limit against the companion of the differential operator
        let comp = lib(companion_diff(&make_coh_operator(&z, &lams)))?;
        let at = |qq: &ComplexAP| -> Result<Mat<ComplexAP>, String> {
            lib(comp.try_map(|e| e.eval(qq)))
        };
        let d0 = rep.b_limit_at_zero.dist(&at(&ComplexAP::zero(PREC))?).to_f64();
        ensure!(
            d0 < LIMIT_TOL,
            "B limit at Q = 0 differs from the companion by {d0:.3e}"
        );
        for (s, qq) in samples.iter().enumerate() {
            let ds = rep.b_limit_at_samples[s].dist(&at(qq)?).to_f64();
            ensure!(
                ds < LIMIT_TOL,
                "B limit at sample {s} differs from the companion by {ds:.3e}"
            );
        }

        // a family with a non-unipotent constant part must be rejected
        let divergent = |qt: &ComplexAP| -> qconf::Result<QSystem<ComplexAP>> {
            let zero = RatQ::from_poly(PolyQ::zero(qt));
            let two = RatQ::from_poly(PolyQ::constant(qt.from_i64(2)));
            let qd = RatQ::from_poly(PolyQ::constant(qt.clone()));
            Ok(QSystem::new(
                qt.clone(),
                Mat::from_rows(vec![vec![two, zero.clone()], vec![zero, qd]]),
            ))
        };
        let err = sauloy_confluence_check(divergent, &setup);
        ensure!(
            matches!(err, Err(Error::NoConvergence(_))),
            "divergent control must fail with NoConvergence, got {err:?}"
        );
        Ok(())
    };
    finish(
        "companion-system regularity and limit",
        Duration::from_secs(30),
        t0,
        run(),
    );
}

#[test]
fn ring_and_derivation_identities_hold() {
    let t0 = Instant::now();
    let run = || -> Result<(), String> {
        // partition of unity: the all-ones class is the constant polynomial 1
        for n in 1..=4usize {
            let lams: Vec<Rational> =
                (0..=n).map(|i| rat(i as i64 + 1, i as i64 + 2)).collect();
            let unit = KClassEq::unit(n, &rat(1, 1));
            let mono = lib(eta_to_monomial(&unit, &lams))?;
            ensure!(mono[0].is_one(), "n = {n}: constant coefficient is not 1");
            ensure!(
                mono[1..].iter().all(Zero::is_zero),
                "n = {n}: higher monomial coefficients must vanish"
            );
        }

        // gamma and its weighted counterpart are ring isomorphisms
        let mut rng = Rng(0x7e1a_11eb_0004);
        for n in 1..=3usize {
            ensure!(
                gamma_noneq(&KClassNonEq::unit(n, &rat(1, 1)))
                    == CohClassNonEq::unit(n, &rat(1, 1)),
                "n = {n}: gamma does not fix the unit"
            );
            for _ in 0..5 {
                let x = KClassNonEq::new((0..=n).map(|_| rng.rat()).collect());
                let y = KClassNonEq::new((0..=n).map(|_| rng.rat()).collect());
                let gx = gamma_noneq(&x);
                let gy = gamma_noneq(&y);
                ensure!(
                    gamma_noneq(&(x.clone() * &y)) == gx.clone() * &gy,
                    "n = {n}: gamma is not multiplicative"
                );
                ensure!(
                    gamma_noneq_inv(&gx) == x,
                    "n = {n}: gamma inverse does not round-trip"
                );
            }

            let lams: Vec<Rational> = (0..=n).map(|i| rat(2 * i as i64 + 1, 2)).collect();
            for _ in 0..5 {
                let x = KClassEq::new((0..=n).map(|_| rng.rat()).collect());
                let y = KClassEq::new((0..=n).map(|_| rng.rat()).collect());
                let gx = lib(gamma_eq(&x, &lams))?;
                let gy = lib(gamma_eq(&y, &lams))?;
                ensure!(
                    lib(gamma_eq(&(x.clone() * &y), &lams))? == gx.clone() * &gy,
                    "n = {n}: weighted gamma is not multiplicative"
                );
                ensure!(
                    lib(gamma_eq_inv(&gx, &lams))? == x,
                    "n = {n}: weighted gamma inverse does not round-trip"
                );
            }
        }

        // twisted Leibniz rule for the q-derivation
        let q = rat(2, 3);
        let proto = rat(1, 1);
        for _ in 0..8 {
            let a = TruncSeries::from_coeffs(
                0,
                (0..6).map(|_| rng.rat()).collect(),
                5,
                &proto,
            );
            let b = TruncSeries::from_coeffs(
                0,
                (0..6).map(|_| rng.rat()).collect(),
                5,
                &proto,
            );
            let lhs = lib(a.mul(&b).delta_q(&q))?;
            let rhs = lib(a.delta_q(&q))?
                .mul(&b.sigma_shift(&q))
                .add(&a.mul(&lib(b.delta_q(&q))?));
            ensure!(lhs == rhs, "twisted Leibniz identity fails");
        }

        // g_b assembly against the direct product expansion
        for n in 1..=3usize {
            for z in [rat(1, 1), rat(5, 7)] {
                let d_max = 6i64;
                let h = hyper_coeffs(&z, n, d_max);
                let gbs: Vec<TruncSeries<Rational>> = (0..=n)
                    .map(|b| lib(g_b(&z, n, b, d_max)))
                    .collect::<Result<_, _>>()?;
                for (d, hd) in h.iter().enumerate() {
                    for (b, gb) in gbs.iter().enumerate() {
                        ensure!(
                            gb.coeff(d as i64) == hd[b],
                            "g_{b} at Q^{d} (n = {n}, z = {z}) disagrees with the expansion"
                        );
                    }
                }
                // the assembled series agrees with the same expansion
                let coh = lib(build_jcoh_noneq(&z, n, d_max))?;
                let free = coh.term(0).ok_or("missing log-free term")?;
                for (d, hd) in h.iter().enumerate() {
                    let class = free.coeff(d as i64);
                    for (k, hc) in hd.iter().enumerate() {
                        ensure!(
                            class.coeff(k) == hc,
                            "assembled H^{k} at Q^{d} (n = {n}, z = {z}) is off"
                        );
                    }
                }
            }
        }
        Ok(())
    };
    finish(
        "ring, derivation, and assembly consistency",
        Duration::from_secs(30),
        t0,
        run(),
    );
}
