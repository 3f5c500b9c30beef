//! `qconf`: J-function tables, annihilation checks, and q -> 1 confluence
//! runs from the command line.
//!
//! Exit codes are stable: 0 success, 2 bad configuration, 3 domain error
//! (resonant weights, spiral cuts, theta zeros), 4 convergence or
//! verification failure.

mod report;

use clap::{Args, Parser, Subcommand, ValueEnum};
use qconf::confluence::{main_theorem_report, Variant};
use qconf::jfun::{build_jcoh_eq, build_jcoh_noneq, build_jk_eq, build_jk_noneq};
use qconf::linalg::Mat;
use qconf::qop::{
    apply_diff_column, apply_diff_logpoly, apply_qdiff_column, apply_qdiff_logpoly,
    eq_delta_op_at, formal_limit, make_coh_operator, make_coh_operator_noneq, make_kth_operator,
    make_kth_operator_noneq, noneq_delta_op_at, PolyQ, RatQ,
};
use qconf::qsystems::{sauloy_confluence_check, sigma_system_from_delta_op, QSystem, SauloySetup};
use qconf::rings::{CohClassNonEq, KClassNonEq};
use qconf::scalar::{
    principal_power, ComplexAP, RatFunc, Rational, Scalar, Var, DEFAULT_PRECISION, MIN_PRECISION,
};
use qconf::series::{LogPoly, TruncSeries};
use qconf::specfun::{e_q_char, ell_q_eval, q_log_limit_check, theta_auto_window, theta_eval};
use report::{
    complex_json, digits_for, flag_rational, flag_rational_list, json_num, mat_json, rat_str,
    to_complex, to_complex_pair, Document, Failure, Format, Rendered, Row,
};
use serde_json::{json, Value};

#[derive(Parser)]
#[command(name = "qconf", version, about = "q-difference confluence toolkit")]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Tabulate J-function coefficients on either side of the correspondence
    Jfun(JfunArgs),
    /// Check that a built series is annihilated by its difference operator
    Verify(VerifyArgs),
    /// Drive q -> 1 along q0^t and compare with the differential side
    Confluence(ConfluenceArgs),
    /// Evaluate theta, the q-logarithm, and q-characters
    Specfun(SpecfunArgs),
    /// Run the four-condition confluence criterion on a system family
    SauloyCheck(SauloyArgs),
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Side {
    /// K-theoretic, a q-difference equation in Q
    Kth,
    /// cohomological, a differential equation in Q
    Coh,
}

impl Side {
    fn name(self) -> &'static str {
        match self {
            Side::Kth => "kth",
            Side::Coh => "coh",
        }
    }
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Weights {
    /// torus-equivariant, weights from --lambda
    Eq,
    /// non-equivariant
    Noneq,
}

impl Weights {
    fn name(self) -> &'static str {
        match self {
            Weights::Eq => "eq",
            Weights::Noneq => "noneq",
        }
    }
}

#[derive(Args)]
struct OutputArgs {
    /// Destination path, `-` for stdout
    #[arg(long, default_value = "-")]
    output: String,
    #[arg(long, value_enum, default_value_t = Format::Json)]
    format: Format,
    /// Working precision in bits; defaults to QCONF_PRECISION_BITS or 256
    #[arg(long)]
    bits: Option<u32>,
}

impl OutputArgs {
    fn resolve_bits(&self) -> Result<u32, Failure> {
        let bits = match self.bits {
            Some(b) => b,
            None => match std::env::var("QCONF_PRECISION_BITS") {
                Ok(s) => s.trim().parse().map_err(|_| {
                    Failure::Config(format!("QCONF_PRECISION_BITS is not a number: `{s}`"))
                })?,
                Err(_) => DEFAULT_PRECISION,
            },
        };
        if bits < MIN_PRECISION {
            return Err(Failure::Config(format!(
                "precision must be at least {MIN_PRECISION} bits, got {bits}"
            )));
        }
        Ok(bits)
    }
}

fn rat(n: i64, d: i64) -> Rational {
    Rational::new(n.into(), d.into())
}

fn main() {
    let cli = Cli::parse();
    if let Err(f) = run(cli) {
        eprintln!("error: {}", f.message());
        std::process::exit(f.code());
    }
}

fn run(cli: Cli) -> Result<(), Failure> {
    match cli.cmd {
        Cmd::Jfun(a) => cmd_jfun(a),
        Cmd::Verify(a) => cmd_verify(a),
        Cmd::Confluence(a) => cmd_confluence(a),
        Cmd::Specfun(a) => match a.which {
            SpecfunCmd::Theta(t) => cmd_theta(t),
            SpecfunCmd::Ell(e) => cmd_ell(e),
            SpecfunCmd::Echar(e) => cmd_echar(e),
        },
        Cmd::SauloyCheck(a) => cmd_sauloy(a),
    }
}

// ---------------------------------------------------------------- jfun

#[derive(Args)]
struct JfunArgs {
    #[arg(long, value_enum)]
    variant: Side,
    /// Projective space dimension N
    #[arg(long)]
    n: usize,
    /// Truncation order in Q
    #[arg(long)]
    trunc: i64,
    /// Base q (K-theoretic side), exact rational or decimal
    #[arg(long, default_value = "1/2", allow_hyphen_values = true)]
    q: String,
    /// Speed parameter z (cohomological side)
    #[arg(long, default_value = "1", allow_hyphen_values = true)]
    z: String,
    /// Equivariant weights, comma separated, length N+1
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
    lambda: Vec<String>,
    #[command(flatten)]
    out: OutputArgs,
}

fn cmd_jfun(a: JfunArgs) -> Result<(), Failure> {
    let bits = a.out.resolve_bits()?;
    if a.trunc < 0 {
        return Err(Failure::Config("--trunc must be nonnegative".into()));
    }
    let q = flag_rational("--q", &a.q)?;
    let z = flag_rational("--z", &a.z)?;
    let lambdas = flag_rational_list("--lambda", &a.lambda)?;
    let equivariant = !lambdas.is_empty();
    if equivariant {
        if a.n == 0 {
            return Err(Failure::Config("equivariant runs need --n >= 1".into()));
        }
        if lambdas.len() != a.n + 1 {
            return Err(Failure::Config(format!(
                "--lambda needs {} weights, got {}",
                a.n + 1,
                lambdas.len()
            )));
        }
    }
    if a.variant == Side::Kth && !(q > rat(0, 1) && q < rat(1, 1)) {
        return Err(Failure::Config("--q must lie in (0, 1)".into()));
    }
    if a.variant == Side::Coh && Scalar::is_zero(&z) {
        return Err(Failure::Config("--z must be nonzero".into()));
    }

    let mut doc = Document::new("jfun");
    doc.param("variant", json!(a.variant.name()));
    doc.param("equivariant", json!(equivariant));
    doc.param("n", json!(a.n));
    doc.param("trunc", json!(a.trunc));
    doc.param("bits", json!(bits));
    doc.param("q", json!(rat_str(&q)));
    doc.param("z", json!(rat_str(&z)));
    if equivariant {
        doc.param(
            "lambda",
            Value::Array(lambdas.iter().map(|l| json!(rat_str(l))).collect()),
        );
    }

    match (a.variant, equivariant) {
        (Side::Kth, false) => {
            let j = build_jk_noneq(&q, a.n, a.trunc)?;
            for k in 0..=a.n {
                for d in 0..=a.trunc {
                    for (l, term) in j.value.terms().iter().enumerate() {
                        let c = term.coeff(d);
                        doc.push(Row {
                            basis: Some(k),
                            qdeg: Some(d),
                            logdeg: Some(l),
                            value: Some(Rendered::rational(c.coeff(k))),
                            ..Default::default()
                        });
                    }
                }
            }
        }
        (Side::Coh, false) => {
            let sol = build_jcoh_noneq(&z, a.n, a.trunc)?;
            for k in 0..=a.n {
                for d in 0..=a.trunc {
                    for (l, term) in sol.terms().iter().enumerate() {
                        let c = term.coeff(d);
                        doc.push(Row {
                            basis: Some(k),
                            qdeg: Some(d),
                            logdeg: Some(l),
                            value: Some(Rendered::rational(c.coeff(k))),
                            ..Default::default()
                        });
                    }
                }
            }
        }
        (Side::Kth, true) => {
            let qc = to_complex(bits, &q);
            let zc = to_complex(bits, &z);
            let zinv = zc.inv()?;
            let big: Vec<ComplexAP> = lambdas
                .iter()
                .map(|l| principal_power(&qc, &-(to_complex(bits, l) * &zinv)))
                .collect::<qconf::Result<_>>()?;
            let j = build_jk_eq(&qc, &big, a.trunc)?;
            let digits = digits_for(bits);
            doc.extra(
                "lambda_multipliers",
                Value::Array(big.iter().map(|l| complex_json(l, digits)).collect()),
            );
            for (i, col) in j.columns.iter().enumerate() {
                for d in 0..=a.trunc {
                    doc.push(Row {
                        basis: Some(i),
                        qdeg: Some(d),
                        value: Some(Rendered::complex(&col.series.coeff(d), digits)),
                        ..Default::default()
                    });
                }
            }
        }
        (Side::Coh, true) => {
            let j = build_jcoh_eq(&lambdas, &z, a.trunc)?;
            doc.extra(
                "marker_exponents",
                Value::Array(
                    j.columns
                        .iter()
                        .map(|c| json!(rat_str(&c.marker_exponent)))
                        .collect(),
                ),
            );
            for (i, col) in j.columns.iter().enumerate() {
                for d in 0..=a.trunc {
                    doc.push(Row {
                        basis: Some(i),
                        qdeg: Some(d),
                        value: Some(Rendered::rational(&col.series.coeff(d))),
                        ..Default::default()
                    });
                }
            }
        }
    }
    doc.emit(a.out.format, &a.out.output)
}

// -------------------------------------------------------------- verify

#[derive(Args)]
struct VerifyArgs {
    /// Which side's equation to check
    #[arg(long, value_enum)]
    equation: Side,
    #[arg(long, value_enum)]
    variant: Weights,
    #[arg(long)]
    n: usize,
    #[arg(long)]
    trunc: i64,
    /// Base q for the non-equivariant K-theoretic check
    #[arg(long, default_value = "1/2", allow_hyphen_values = true)]
    q: String,
    /// Speed parameter z for the non-equivariant cohomological check
    #[arg(long, default_value = "1", allow_hyphen_values = true)]
    z: String,
    /// Corrupt one coefficient first; the run must then locate it and fail
    #[arg(long)]
    corrupt: bool,
    #[command(flatten)]
    out: OutputArgs,
}

fn cmd_verify(a: VerifyArgs) -> Result<(), Failure> {
    if a.trunc < 0 {
        return Err(Failure::Config("--trunc must be nonnegative".into()));
    }
    let q = flag_rational("--q", &a.q)?;
    let z = flag_rational("--z", &a.z)?;
    if a.variant == Weights::Eq && a.n == 0 {
        return Err(Failure::Config("equivariant runs need --n >= 1".into()));
    }
    if a.equation == Side::Kth && a.variant == Weights::Noneq && !(q > rat(0, 1) && q < rat(1, 1)) {
        return Err(Failure::Config("--q must lie in (0, 1)".into()));
    }
    if a.equation == Side::Coh && a.variant == Weights::Noneq && Scalar::is_zero(&z) {
        return Err(Failure::Config("--z must be nonzero".into()));
    }

    let mut doc = Document::new("verify");
    doc.param("equation", json!(a.equation.name()));
    doc.param("variant", json!(a.variant.name()));
    doc.param("n", json!(a.n));
    doc.param("trunc", json!(a.trunc));
    doc.param("corrupt", json!(a.corrupt));
    match (a.equation, a.variant) {
        (Side::Kth, Weights::Noneq) => doc.param("q", json!(rat_str(&q))),
        (Side::Coh, Weights::Noneq) => doc.param("z", json!(rat_str(&z))),
        _ => {}
    }

    // every branch is exact: residuals are identically zero or provably not
    let mut nonzero = 0usize;
    match (a.equation, a.variant) {
        (Side::Kth, Weights::Noneq) => {
            let qcl = KClassNonEq::unit(a.n, &q).mul_scalar(&q);
            let op = make_kth_operator_noneq(&qcl, a.n);
            let mut sol = build_jk_noneq(&q, a.n, a.trunc)?.value;
            if a.corrupt {
                sol = sol.add(&LogPoly::from_series(TruncSeries::monomial(
                    a.trunc,
                    KClassNonEq::unit(a.n, &q),
                    a.trunc,
                )));
            }
            let res = apply_qdiff_logpoly(&op, &sol)?;
            for k in 0..=a.n {
                for d in 0..=a.trunc {
                    for (l, term) in res.terms().iter().enumerate() {
                        let c = term.coeff(d);
                        if !Scalar::is_zero(c.coeff(k)) {
                            nonzero += 1;
                            doc.push(Row {
                                basis: Some(k),
                                qdeg: Some(d),
                                logdeg: Some(l),
                                value: Some(Rendered::rational(c.coeff(k))),
                                ..Default::default()
                            });
                        }
                    }
                }
            }
        }
        (Side::Coh, Weights::Noneq) => {
            let zcl = CohClassNonEq::unit(a.n, &z).mul_scalar(&z);
            let op = make_coh_operator_noneq(&zcl, a.n);
            let mut sol = build_jcoh_noneq(&z, a.n, a.trunc)?;
            if a.corrupt {
                sol = sol.add(&LogPoly::from_series(TruncSeries::monomial(
                    a.trunc,
                    CohClassNonEq::unit(a.n, &z),
                    a.trunc,
                )));
            }
            let res = apply_diff_logpoly(&op, &sol)?;
            for k in 0..=a.n {
                for d in 0..=a.trunc {
                    for (l, term) in res.terms().iter().enumerate() {
                        let c = term.coeff(d);
                        if !Scalar::is_zero(c.coeff(k)) {
                            nonzero += 1;
                            doc.push(Row {
                                basis: Some(k),
                                qdeg: Some(d),
                                logdeg: Some(l),
                                value: Some(Rendered::rational(c.coeff(k))),
                                ..Default::default()
                            });
                        }
                    }
                }
            }
        }
        (Side::Kth, Weights::Eq) => {
            let qv = RatFunc::var(Var::Q);
            let lams: Vec<RatFunc> =
                (0..=a.n).map(|i| RatFunc::var(Var::LambdaK(i as u32))).collect();
            let op = make_kth_operator(&qv, &lams);
            let j = build_jk_eq(&qv, &lams, a.trunc)?;
            for (i, col) in j.columns.iter().enumerate() {
                let mut col = col.clone();
                if a.corrupt && i == 0 {
                    col.series = col
                        .series
                        .add(&TruncSeries::monomial(a.trunc, qv.one_like(), a.trunc));
                }
                let r = apply_qdiff_column(&op, &col)?;
                for d in 0..=a.trunc {
                    if !Scalar::is_zero(&r.coeff(d)) {
                        nonzero += 1;
                        doc.push(Row {
                            basis: Some(i),
                            qdeg: Some(d),
                            ..Default::default()
                        });
                    }
                }
            }
        }
        (Side::Coh, Weights::Eq) => {
            let zv = RatFunc::var(Var::Z);
            let lams: Vec<RatFunc> =
                (0..=a.n).map(|i| RatFunc::var(Var::LambdaH(i as u32))).collect();
            let op = make_coh_operator(&zv, &lams);
            let sol = build_jcoh_eq(&lams, &zv, a.trunc)?;
            for (i, col) in sol.columns.iter().enumerate() {
                let mut col = col.clone();
                if a.corrupt && i == 0 {
                    col.series = col
                        .series
                        .add(&TruncSeries::monomial(a.trunc, zv.one_like(), a.trunc));
                }
                let r = apply_diff_column(&op, &col)?;
                for d in 0..=a.trunc {
                    if !Scalar::is_zero(&r.coeff(d)) {
                        nonzero += 1;
                        doc.push(Row {
                            basis: Some(i),
                            qdeg: Some(d),
                            ..Default::default()
                        });
                    }
                }
            }
        }
    }

    let pass = nonzero == 0;
    doc.extra("equation", json!(a.equation.name()));
    doc.extra("truncation", json!(a.trunc));
    doc.extra("residual_max", json!(if pass { "0" } else { "nonzero" }));
    doc.extra("pass", json!(pass));
    doc.emit(a.out.format, &a.out.output)?;
    if pass {
        Ok(())
    } else {
        Err(Failure::Check(format!(
            "residual is nonzero at {nonzero} coefficients"
        )))
    }
}

// ---------------------------------------------------------- confluence

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Level {
    /// Limits of the transformed fundamental solution
    Solution,
    /// Limits of the normalized operator coefficients
    Equation,
}

#[derive(Args)]
struct ConfluenceArgs {
    #[arg(long, value_enum, default_value_t = Level::Solution)]
    level: Level,
    #[arg(long, value_enum)]
    variant: Weights,
    #[arg(long)]
    n: usize,
    /// Truncation order in Q (solution level)
    #[arg(long, default_value_t = 3)]
    trunc: i64,
    /// Confluence base in (0, 1); q runs through q0^t
    #[arg(long, default_value = "1/2", allow_hyphen_values = true)]
    q0: String,
    #[arg(long, default_value = "1", allow_hyphen_values = true)]
    z: String,
    /// Equivariant weights, comma separated, length N+1
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
    lambda: Vec<String>,
    /// Geometric t grid: start, ratio, count
    #[arg(long, default_value_t = 0.1)]
    t_start: f64,
    #[arg(long, default_value_t = 0.1)]
    t_ratio: f64,
    #[arg(long, default_value_t = 4)]
    t_count: u32,
    #[arg(long, default_value_t = 1e-3)]
    tol: f64,
    #[command(flatten)]
    out: OutputArgs,
}

struct Grid {
    ts: Vec<f64>,
}

fn make_grid(start: f64, ratio: f64, count: u32) -> Result<Grid, Failure> {
    if !(start > 0.0 && start <= 1.0) {
        return Err(Failure::Config("--t-start must lie in (0, 1]".into()));
    }
    if !(ratio > 0.0 && ratio < 1.0) {
        return Err(Failure::Config("--t-ratio must lie in (0, 1)".into()));
    }
    if count < 2 {
        return Err(Failure::Config("--t-count must be at least 2".into()));
    }
    Ok(Grid {
        ts: (0..count).map(|k| start * ratio.powi(k as i32)).collect(),
    })
}

fn confluence_base(flag_q0: &str) -> Result<Rational, Failure> {
    let q0 = flag_rational("--q0", flag_q0)?;
    if !(q0 > rat(0, 1) && q0 < rat(1, 1)) {
        return Err(Failure::Config("--q0 must lie in (0, 1)".into()));
    }
    Ok(q0)
}

fn cmd_confluence(a: ConfluenceArgs) -> Result<(), Failure> {
    let bits = a.out.resolve_bits()?;
    if a.trunc < 0 {
        return Err(Failure::Config("--trunc must be nonnegative".into()));
    }
    if a.tol <= 0.0 {
        return Err(Failure::Config("--tol must be positive".into()));
    }
    let q0 = confluence_base(&a.q0)?;
    let z = flag_rational("--z", &a.z)?;
    if Scalar::is_zero(&z) {
        return Err(Failure::Config("--z must be nonzero".into()));
    }
    let lambdas = flag_rational_list("--lambda", &a.lambda)?;
    match a.variant {
        Weights::Eq => {
            if a.n == 0 {
                return Err(Failure::Config("equivariant runs need --n >= 1".into()));
            }
            if lambdas.len() != a.n + 1 {
                return Err(Failure::Config(format!(
                    "--lambda needs {} weights, got {}",
                    a.n + 1,
                    lambdas.len()
                )));
            }
        }
        Weights::Noneq => {
            if !lambdas.is_empty() {
                return Err(Failure::Config(
                    "--lambda applies to the equivariant variant only".into(),
                ));
            }
        }
    }
    let grid = make_grid(a.t_start, a.t_ratio, a.t_count)?;
    let ts = &grid.ts;

    let q0c = to_complex(bits, &q0);
    let zc = to_complex(bits, &z);
    let lamsc: Vec<ComplexAP> = lambdas.iter().map(|l| to_complex(bits, l)).collect();
    let digits = digits_for(bits);

    let mut doc = Document::new("confluence");
    doc.param(
        "level",
        json!(match a.level {
            Level::Solution => "solution",
            Level::Equation => "equation",
        }),
    );
    doc.param("variant", json!(a.variant.name()));
    doc.param("n", json!(a.n));
    doc.param("q0", json!(rat_str(&q0)));
    doc.param("z", json!(rat_str(&z)));
    if a.variant == Weights::Eq {
        doc.param(
            "lambda",
            Value::Array(lambdas.iter().map(|l| json!(rat_str(l))).collect()),
        );
    }
    doc.param("t_start", json_num(a.t_start));
    doc.param("t_ratio", json_num(a.t_ratio));
    doc.param("t_count", json!(a.t_count));
    doc.param("tol", json_num(a.tol));
    doc.param("bits", json!(bits));

    match a.level {
        Level::Solution => {
            doc.param("trunc", json!(a.trunc));
            let variant = match a.variant {
                Weights::Eq => Variant::Eq,
                Weights::Noneq => Variant::NonEq,
            };
            let out = main_theorem_report(variant, a.n, a.trunc, &q0c, &zc, &lamsc, ts, a.tol)?;
            for r in &out.report.rows {
                for (k, &t) in ts.iter().enumerate() {
                    doc.push(Row {
                        basis: Some(r.basis),
                        qdeg: Some(r.qdeg),
                        logdeg: Some(r.logdeg),
                        t: Some(t),
                        value: Some(Rendered::complex(&r.values[k], digits)),
                        target: Some(Rendered::complex(&r.target, digits)),
                        error: Some(r.errors[k]),
                        monotone: Some(r.monotone),
                    });
                }
            }
            let gamma: Vec<Value> = out
                .gamma_rows
                .iter()
                .map(|g| {
                    json!({
                        "basis": g.basis,
                        "qdeg": g.qdeg,
                        "logdeg": g.logdeg,
                        "value": complex_json(&g.value, digits),
                        "target": complex_json(&g.target, digits),
                        "error": json_num(g.error),
                    })
                })
                .collect();
            doc.extra("gamma", Value::Array(gamma));
            doc.extra("gamma_pass", json!(out.gamma_pass));
            doc.extra("verdict", json!(out.report.verdict));
            doc.extra("passed", json!(out.passed));
            doc.emit(a.out.format, &a.out.output)?;
            if out.passed {
                Ok(())
            } else if out.report.verdict {
                Err(Failure::Check("limit-vs-target comparison failed".into()))
            } else {
                Err(Failure::Check("coefficient limits did not converge".into()))
            }
        }
        Level::Equation => {
            let target = match a.variant {
                Weights::Eq => make_coh_operator(&zc, &lamsc),
                Weights::Noneq => make_coh_operator_noneq(&zc, a.n),
            };
            let rep = formal_limit(
                |t| {
                    let qt = q0c.pow(&ComplexAP::from_f64(bits, t, 0.0))?;
                    match a.variant {
                        Weights::Eq => eq_delta_op_at(&qt, &lamsc, &zc),
                        Weights::Noneq => noneq_delta_op_at(&qt, a.n, &zc),
                    }
                },
                ts,
                &target,
                a.tol,
            )?;
            for c in &rep.coefficients {
                for (k, &t) in ts.iter().enumerate() {
                    doc.push(Row {
                        basis: Some(c.delta_power),
                        t: Some(t),
                        error: Some(c.errors[k]),
                        ..Default::default()
                    });
                }
            }
            let poly_json = |p: &PolyQ<ComplexAP>| {
                let d = p.degree().unwrap_or(0);
                Value::Array((0..=d).map(|j| complex_json(&p.coeff(j), digits)).collect())
            };
            let ops_json = |coeffs: &[PolyQ<ComplexAP>]| {
                Value::Array(
                    coeffs
                        .iter()
                        .enumerate()
                        .map(|(k, p)| json!({ "delta_power": k, "coeffs": poly_json(p) }))
                        .collect(),
                )
            };
            doc.extra("candidate", ops_json(&rep.candidate.coeffs));
            doc.extra("target", ops_json(&target.coeffs));
            doc.extra(
                "coefficients",
                Value::Array(
                    rep.coefficients
                        .iter()
                        .map(|c| json!({ "delta_power": c.delta_power, "converged": c.converged }))
                        .collect(),
                ),
            );
            doc.extra("confluent", json!(rep.confluent));
            doc.emit(a.out.format, &a.out.output)?;
            if rep.confluent {
                Ok(())
            } else {
                Err(Failure::Check(
                    "operator coefficients did not converge".into(),
                ))
            }
        }
    }
}

// ------------------------------------------------------------- specfun

#[derive(Args)]
struct SpecfunArgs {
    #[command(subcommand)]
    which: SpecfunCmd,
}

#[derive(Subcommand)]
enum SpecfunCmd {
    /// Theta value; optionally check the three-term shift relation
    Theta(ThetaArgs),
    /// q-logarithm value, its shift relation, or the q -> 1 limit table
    Ell(EllArgs),
    /// q-character value and its scaling relation
    Echar(EcharArgs),
}

fn specfun_point(
    bits: u32,
    flag_q: &str,
    flag_at: &str,
    flag_at_im: &str,
) -> Result<(ComplexAP, ComplexAP, Rational, Rational, Rational), Failure> {
    let q = flag_rational("--q", flag_q)?;
    if !(q > rat(0, 1) && q < rat(1, 1)) {
        return Err(Failure::Config("--q must lie in (0, 1)".into()));
    }
    let at = flag_rational("--at", flag_at)?;
    let at_im = flag_rational("--at-im", flag_at_im)?;
    let qc = to_complex(bits, &q);
    let qq = to_complex_pair(bits, &at, &at_im);
    Ok((qc, qq, q, at, at_im))
}

#[derive(Args)]
struct ThetaArgs {
    #[arg(long, allow_hyphen_values = true)]
    q: String,
    /// Real part of the argument Q
    #[arg(long, allow_hyphen_values = true)]
    at: String,
    /// Imaginary part of the argument Q
    #[arg(long, default_value = "0", allow_hyphen_values = true)]
    at_im: String,
    #[arg(long, default_value_t = 1e-12)]
    tol: f64,
    /// Also check Q theta(qQ) = theta(Q)
    #[arg(long)]
    check_qde: bool,
    #[command(flatten)]
    out: OutputArgs,
}

fn cmd_theta(a: ThetaArgs) -> Result<(), Failure> {
    let bits = a.out.resolve_bits()?;
    if a.tol <= 0.0 {
        return Err(Failure::Config("--tol must be positive".into()));
    }
    let (qc, qq, q, at, at_im) = specfun_point(bits, &a.q, &a.at, &a.at_im)?;
    let digits = digits_for(bits);

    let mut doc = Document::new("specfun-theta");
    doc.param("q", json!(rat_str(&q)));
    doc.param("at", json!(rat_str(&at)));
    doc.param("at_im", json!(rat_str(&at_im)));
    doc.param("tol", json_num(a.tol));
    doc.param("bits", json!(bits));

    let m = theta_auto_window(&qc, &qq, a.tol)?;
    let v = theta_eval(&qc, &qq, m, a.tol)?;
    doc.extra("window", json!(m));
    doc.push(Row {
        value: Some(Rendered::complex(&v, digits)),
        ..Default::default()
    });

    let mut check = None;
    if a.check_qde {
        let shifted = qc.clone() * &qq;
        let m2 = theta_auto_window(&qc, &shifted, a.tol)?.max(m);
        let lhs = qq.clone() * &theta_eval(&qc, &shifted, m2, a.tol)?;
        let rhs = theta_eval(&qc, &qq, m2, a.tol)?;
        let resid = lhs.dist(&rhs).to_f64();
        let ok = resid < a.tol;
        doc.extra("qde_residual", json_num(resid));
        doc.extra("qde_pass", json!(ok));
        if !ok {
            check = Some(format!("shift-relation residual {resid:e} exceeds {:e}", a.tol));
        }
    }
    doc.emit(a.out.format, &a.out.output)?;
    match check {
        None => Ok(()),
        Some(m) => Err(Failure::Check(m)),
    }
}

#[derive(Args)]
struct EllArgs {
    #[arg(long, allow_hyphen_values = true)]
    q: String,
    #[arg(long, allow_hyphen_values = true)]
    at: String,
    #[arg(long, default_value = "0", allow_hyphen_values = true)]
    at_im: String,
    #[arg(long, default_value_t = 1e-10)]
    tol: f64,
    /// Tabulate |(q^t - 1) ell(Q) - log Q| along t = 2^-1 .. 2^-steps
    #[arg(long)]
    log_limit: bool,
    #[arg(long, default_value_t = 12)]
    steps: u32,
    #[command(flatten)]
    out: OutputArgs,
}

fn cmd_ell(a: EllArgs) -> Result<(), Failure> {
    let bits = a.out.resolve_bits()?;
    if a.tol <= 0.0 {
        return Err(Failure::Config("--tol must be positive".into()));
    }
    let (qc, qq, q, at, at_im) = specfun_point(bits, &a.q, &a.at, &a.at_im)?;
    let digits = digits_for(bits);

    let mut doc = Document::new("specfun-ell");
    doc.param("q", json!(rat_str(&q)));
    doc.param("at", json!(rat_str(&at)));
    doc.param("at_im", json!(rat_str(&at_im)));
    doc.param("tol", json_num(a.tol));
    doc.param("bits", json!(bits));

    if a.log_limit {
        if a.steps < 2 {
            return Err(Failure::Config("--steps must be at least 2".into()));
        }
        doc.param("steps", json!(a.steps));
        let ts: Vec<f64> = (1..=a.steps).map(|k| 0.5f64.powi(k as i32)).collect();
        let table = q_log_limit_check(&qc, &qq, &ts)?;
        for &(t, err) in &table {
            doc.push(Row {
                t: Some(t),
                error: Some(err),
                ..Default::default()
            });
        }
        let decreasing = table.windows(2).all(|w| w[1].1 < w[0].1);
        doc.extra("decreasing", json!(decreasing));
        doc.extra("final_error", json_num(table.last().expect("nonempty").1));
        doc.emit(a.out.format, &a.out.output)?;
        if decreasing {
            Ok(())
        } else {
            Err(Failure::Check("limit errors are not decreasing".into()))
        }
    } else {
        let m = theta_auto_window(&qc, &qq, a.tol)?;
        let v = ell_q_eval(&qc, &qq, m, a.tol)?;
        doc.extra("window", json!(m));
        doc.push(Row {
            value: Some(Rendered::complex(&v, digits)),
            ..Default::default()
        });
        let shifted = qc.clone() * &qq;
        let m2 = theta_auto_window(&qc, &shifted, a.tol)?.max(m);
        let lhs = ell_q_eval(&qc, &shifted, m2, a.tol)?;
        let rhs = ell_q_eval(&qc, &qq, m2, a.tol)? + &ComplexAP::one(bits);
        let resid = lhs.dist(&rhs).to_f64();
        let ok = resid < a.tol;
        doc.extra("shift_residual", json_num(resid));
        doc.extra("shift_pass", json!(ok));
        doc.emit(a.out.format, &a.out.output)?;
        if ok {
            Ok(())
        } else {
            Err(Failure::Check(format!(
                "shift-relation residual {resid:e} exceeds {:e}",
                a.tol
            )))
        }
    }
}

#[derive(Args)]
struct EcharArgs {
    #[arg(long, allow_hyphen_values = true)]
    q: String,
    /// Character weight, a nonzero rational
    #[arg(long, allow_hyphen_values = true)]
    lambda: String,
    #[arg(long, allow_hyphen_values = true)]
    at: String,
    #[arg(long, default_value = "0", allow_hyphen_values = true)]
    at_im: String,
    #[arg(long, default_value_t = 1e-10)]
    tol: f64,
    #[command(flatten)]
    out: OutputArgs,
}

fn cmd_echar(a: EcharArgs) -> Result<(), Failure> {
    let bits = a.out.resolve_bits()?;
    if a.tol <= 0.0 {
        return Err(Failure::Config("--tol must be positive".into()));
    }
    let lam = flag_rational("--lambda", &a.lambda)?;
    if Scalar::is_zero(&lam) {
        return Err(Failure::Config("--lambda must be nonzero".into()));
    }
    let (qc, qq, q, at, at_im) = specfun_point(bits, &a.q, &a.at, &a.at_im)?;
    let lamc = to_complex(bits, &lam);
    let digits = digits_for(bits);

    let mut doc = Document::new("specfun-echar");
    doc.param("q", json!(rat_str(&q)));
    doc.param("lambda", json!(rat_str(&lam)));
    doc.param("at", json!(rat_str(&at)));
    doc.param("at_im", json!(rat_str(&at_im)));
    doc.param("tol", json_num(a.tol));
    doc.param("bits", json!(bits));

    let v = e_q_char(&qc, &lamc, &qq, a.tol)?;
    doc.push(Row {
        value: Some(Rendered::complex(&v, digits)),
        ..Default::default()
    });
    let shifted = qc.clone() * &qq;
    let lhs = e_q_char(&qc, &lamc, &shifted, a.tol)?;
    let rhs = lamc.clone() * &v;
    let resid = lhs.dist(&rhs).to_f64();
    let ok = resid < a.tol;
    doc.extra("scaling_residual", json_num(resid));
    doc.extra("scaling_pass", json!(ok));
    doc.emit(a.out.format, &a.out.output)?;
    if ok {
        Ok(())
    } else {
        Err(Failure::Check(format!(
            "scaling-relation residual {resid:e} exceeds {:e}",
            a.tol
        )))
    }
}

// -------------------------------------------------------- sauloy-check

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum FamilyKind {
    /// Equivariant pullbacked system; passes for generic weights
    Eq,
    /// Non-equivariant pullbacked system; hits the non-semisimple case
    Noneq,
    /// Control family with a coefficient pole at q = 1; must fail
    Divergent,
}

#[derive(Args)]
struct SauloyArgs {
    #[arg(long, value_enum, default_value_t = FamilyKind::Eq)]
    family: FamilyKind,
    #[arg(long, default_value_t = 1)]
    n: usize,
    #[arg(
        long,
        value_delimiter = ',',
        default_value = "0,1/3",
        allow_hyphen_values = true
    )]
    lambda: Vec<String>,
    #[arg(long, default_value = "1", allow_hyphen_values = true)]
    z: String,
    #[arg(long, default_value = "1/2", allow_hyphen_values = true)]
    q0: String,
    #[arg(long, default_value_t = 0.1)]
    t_start: f64,
    #[arg(long, default_value_t = 0.1)]
    t_ratio: f64,
    #[arg(long, default_value_t = 5)]
    t_count: u32,
    /// Sample points Q for the coefficient limits, comma separated
    #[arg(
        long,
        value_delimiter = ',',
        default_value = "2,3/10",
        allow_hyphen_values = true
    )]
    samples: Vec<String>,
    #[arg(long, default_value_t = 1e-3)]
    tol: f64,
    #[command(flatten)]
    out: OutputArgs,
}

fn cmd_sauloy(a: SauloyArgs) -> Result<(), Failure> {
    let bits = a.out.resolve_bits()?;
    if a.tol <= 0.0 {
        return Err(Failure::Config("--tol must be positive".into()));
    }
    let q0 = confluence_base(&a.q0)?;
    let z = flag_rational("--z", &a.z)?;
    if Scalar::is_zero(&z) {
        return Err(Failure::Config("--z must be nonzero".into()));
    }
    let lambdas = flag_rational_list("--lambda", &a.lambda)?;
    if a.family == FamilyKind::Eq {
        if a.n == 0 {
            return Err(Failure::Config("equivariant runs need --n >= 1".into()));
        }
        if lambdas.len() != a.n + 1 {
            return Err(Failure::Config(format!(
                "--lambda needs {} weights, got {}",
                a.n + 1,
                lambdas.len()
            )));
        }
    }
    let grid = make_grid(a.t_start, a.t_ratio, a.t_count)?;
    let samples_r = flag_rational_list("--samples", &a.samples)?;
    if samples_r.is_empty() {
        return Err(Failure::Config("--samples must name at least one point".into()));
    }

    let q0c = to_complex(bits, &q0);
    let zc = to_complex(bits, &z);
    let lamsc: Vec<ComplexAP> = lambdas.iter().map(|l| to_complex(bits, l)).collect();
    let samples: Vec<ComplexAP> = samples_r.iter().map(|s| to_complex(bits, s)).collect();
    let digits = digits_for(bits);

    let mut doc = Document::new("sauloy-check");
    doc.param(
        "family",
        json!(match a.family {
            FamilyKind::Eq => "eq",
            FamilyKind::Noneq => "noneq",
            FamilyKind::Divergent => "divergent",
        }),
    );
    doc.param("n", json!(a.n));
    doc.param("q0", json!(rat_str(&q0)));
    doc.param("z", json!(rat_str(&z)));
    if a.family == FamilyKind::Eq {
        doc.param(
            "lambda",
            Value::Array(lambdas.iter().map(|l| json!(rat_str(l))).collect()),
        );
    }
    doc.param(
        "samples",
        Value::Array(samples_r.iter().map(|s| json!(rat_str(s))).collect()),
    );
    doc.param("t_start", json_num(a.t_start));
    doc.param("t_ratio", json_num(a.t_ratio));
    doc.param("t_count", json!(a.t_count));
    doc.param("tol", json_num(a.tol));
    doc.param("bits", json!(bits));

    let setup = SauloySetup {
        q0: q0c,
        ts: &grid.ts,
        samples: &samples,
        poles: &[],
        tol: a.tol,
    };
    let report = match a.family {
        FamilyKind::Eq => sauloy_confluence_check(
            |qt| sigma_system_from_delta_op(&eq_delta_op_at(qt, &lamsc, &zc)?),
            &setup,
        ),
        FamilyKind::Noneq => sauloy_confluence_check(
            |qt| sigma_system_from_delta_op(&noneq_delta_op_at(qt, a.n, &zc)?),
            &setup,
        ),
        FamilyKind::Divergent => sauloy_confluence_check(
            |qt| {
                let zero = RatQ::from_poly(PolyQ::zero(&ComplexAP::zero(bits)));
                let two = RatQ::from_poly(PolyQ::constant(ComplexAP::from_f64(bits, 2.0, 0.0)));
                let qdiag = RatQ::from_poly(PolyQ::constant(qt.clone()));
                Ok(QSystem::new(
                    qt.clone(),
                    Mat::from_rows(vec![vec![two, zero.clone()], vec![zero, qdiag]]),
                ))
            },
            &setup,
        ),
    }?;

    for (s, diffs) in report.sample_diffs.iter().enumerate() {
        for (k, &e) in diffs.iter().enumerate() {
            doc.push(Row {
                basis: Some(s),
                t: Some(grid.ts[k + 1]),
                error: Some(e),
                ..Default::default()
            });
        }
    }
    doc.extra("passed", json!(report.passed));
    doc.extra("regular_singular", json!(report.regular_singular));
    doc.extra("nonresonant", json!(report.nonresonant));
    doc.extra(
        "exponents",
        Value::Array(report.exponents.iter().map(|e| complex_json(e, digits)).collect()),
    );
    doc.extra(
        "transform_diffs",
        Value::Array(report.transform_diffs.iter().map(|&e| json_num(e)).collect()),
    );
    doc.extra("b_at_zero", mat_json(&report.b_limit_at_zero, digits));
    doc.extra("transform_limit", mat_json(&report.transform_limit, digits));
    doc.emit(a.out.format, &a.out.output)?;
    if report.passed {
        Ok(())
    } else {
        Err(Failure::Check("confluence criterion failed".into()))
    }
}
