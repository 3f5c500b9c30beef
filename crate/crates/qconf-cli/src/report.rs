//! Report assembly and serialization shared by every subcommand.
//!
//! Output is deterministic: JSON objects use sorted keys, rows are pushed in
//! (basis, degree, t) order by the callers, and numeric strings come from the
//! fixed-precision decimal printer of the scalar layer.

use num_bigint::BigInt;
use num_traits::Zero;
use qconf::linalg::Mat;
use qconf::scalar::{float_from_bigrational, ComplexAP, Rational};
use qconf::ErrorClass;
use rug::Float;
use serde_json::{json, Map, Value};

pub const SCHEMA: &str = "qconf/1";

/// Why a run did not succeed, mapped onto the stable exit codes:
/// 2 bad configuration, 3 domain error, 4 convergence or verification failure.
#[derive(Debug)]
pub enum Failure {
    Config(String),
    Lib(qconf::Error),
    Check(String),
}

impl Failure {
    pub fn code(&self) -> i32 {
        match self {
            Failure::Config(_) => 2,
            Failure::Lib(e) => match e.class() {
                ErrorClass::Domain => 3,
                ErrorClass::Convergence => 4,
            },
            Failure::Check(_) => 4,
        }
    }

    pub fn message(&self) -> String {
        match self {
            Failure::Config(m) => m.clone(),
            Failure::Lib(e) => e.to_string(),
            Failure::Check(m) => m.clone(),
        }
    }
}

impl From<qconf::Error> for Failure {
    fn from(e: qconf::Error) -> Self {
        Failure::Lib(e)
    }
}

/// Parses `p/q`, plain integers, and decimal/scientific literals exactly.
pub fn parse_rational(s: &str) -> Result<Rational, String> {
    let t = s.trim();
    if t.is_empty() {
        return Err("empty number".into());
    }
    if let Some((num, den)) = t.split_once('/') {
        let n: BigInt = num
            .trim()
            .parse()
            .map_err(|_| format!("bad numerator in `{s}`"))?;
        let d: BigInt = den
            .trim()
            .parse()
            .map_err(|_| format!("bad denominator in `{s}`"))?;
        if d.is_zero() {
            return Err(format!("zero denominator in `{s}`"));
        }
        return Ok(Rational::new(n, d));
    }
    let (mant, exp) = match t.split_once(['e', 'E']) {
        Some((m, e)) => (
            m,
            e.parse::<i64>().map_err(|_| format!("bad exponent in `{s}`"))?,
        ),
        None => (t, 0i64),
    };
    let (mant, neg) = match mant.strip_prefix('-') {
        Some(r) => (r, true),
        None => (mant.strip_prefix('+').unwrap_or(mant), false),
    };
    let (int_part, frac_part) = match mant.split_once('.') {
        Some((i, f)) => (i, f),
        None => (mant, ""),
    };
    let digits = format!("{int_part}{frac_part}");
    if digits.is_empty() || !digits.bytes().all(|b| b.is_ascii_digit()) {
        return Err(format!("not a number: `{s}`"));
    }
    let mut num: BigInt = digits.parse().map_err(|_| format!("not a number: `{s}`"))?;
    if neg {
        num = -num;
    }
    let shift = exp - frac_part.len() as i64;
    let ten = BigInt::from(10);
    if shift >= 0 {
        Ok(Rational::from_integer(num * num_traits::pow(ten, shift as usize)))
    } else {
        Ok(Rational::new(num, num_traits::pow(ten, (-shift) as usize)))
    }
}

/// Parses the value of a named flag, turning errors into config failures.
pub fn flag_rational(flag: &str, s: &str) -> Result<Rational, Failure> {
    parse_rational(s).map_err(|e| Failure::Config(format!("{flag}: {e}")))
}

pub fn flag_rational_list(flag: &str, items: &[String]) -> Result<Vec<Rational>, Failure> {
    items.iter().map(|s| flag_rational(flag, s)).collect()
}

/// Canonical `p/q` form; denominators are always positive after reduction.
pub fn rat_str(r: &Rational) -> String {
    format!("{}/{}", r.numer(), r.denom())
}

pub fn to_complex(prec: u32, r: &Rational) -> ComplexAP {
    ComplexAP::new(prec, float_from_bigrational(prec, r), Float::with_val(prec, 0))
}

pub fn to_complex_pair(prec: u32, re: &Rational, im: &Rational) -> ComplexAP {
    ComplexAP::new(
        prec,
        float_from_bigrational(prec, re),
        float_from_bigrational(prec, im),
    )
}

/// Printed decimal digits that preserve the given binary precision.
pub fn digits_for(bits: u32) -> usize {
    (f64::from(bits) * 0.30103).ceil() as usize + 2
}

/// A serialized scalar: exact rationals stay exact, floats carry their
/// precision tag.
#[derive(Debug, Clone)]
pub enum Rendered {
    Exact(String),
    Approx { re: String, im: String, bits: u32 },
}

impl Rendered {
    pub fn rational(r: &Rational) -> Self {
        Rendered::Exact(rat_str(r))
    }

    pub fn complex(c: &ComplexAP, digits: usize) -> Self {
        let (re, im) = c.to_decimal_strings(digits);
        Rendered::Approx {
            re,
            im,
            bits: c.prec(),
        }
    }

    pub fn json(&self) -> Value {
        match self {
            Rendered::Exact(s) => Value::String(s.clone()),
            Rendered::Approx { re, im, bits } => json!({ "re": re, "im": im, "bits": bits }),
        }
    }

    pub fn csv(&self) -> String {
        match self {
            Rendered::Exact(s) => s.clone(),
            Rendered::Approx { re, im, .. } => {
                if im == "0" {
                    re.clone()
                } else if im.starts_with('-') {
                    format!("{re}{im}i")
                } else {
                    format!("{re}+{im}i")
                }
            }
        }
    }
}

pub fn complex_json(c: &ComplexAP, digits: usize) -> Value {
    Rendered::complex(c, digits).json()
}

pub fn mat_json(m: &Mat<ComplexAP>, digits: usize) -> Value {
    let rows: Vec<Value> = (0..m.n())
        .map(|i| {
            let cells: Vec<Value> =
                (0..m.n()).map(|j| complex_json(m.entry(i, j), digits)).collect();
            Value::Array(cells)
        })
        .collect();
    Value::Array(rows)
}

/// Finite floats stay numbers; infinities fall back to strings so the JSON
/// document always serializes.
pub fn json_num(x: f64) -> Value {
    serde_json::Number::from_f64(x)
        .map(Value::Number)
        .unwrap_or_else(|| Value::String(format!("{x}")))
}

#[derive(Debug, Default, Clone)]
pub struct Row {
    pub basis: Option<usize>,
    pub qdeg: Option<i64>,
    pub logdeg: Option<usize>,
    pub t: Option<f64>,
    pub value: Option<Rendered>,
    pub target: Option<Rendered>,
    pub error: Option<f64>,
    pub monotone: Option<bool>,
}

impl Row {
    fn json(&self) -> Value {
        let mut m = Map::new();
        if let Some(b) = self.basis {
            m.insert("basis".into(), json!(b));
        }
        if let Some(d) = self.qdeg {
            m.insert("qdeg".into(), json!(d));
        }
        if let Some(a) = self.logdeg {
            m.insert("logdeg".into(), json!(a));
        }
        if let Some(t) = self.t {
            m.insert("t".into(), json_num(t));
        }
        if let Some(v) = &self.value {
            m.insert("value".into(), v.json());
        }
        if let Some(v) = &self.target {
            m.insert("target".into(), v.json());
        }
        if let Some(e) = self.error {
            m.insert("error".into(), json_num(e));
        }
        if let Some(mono) = self.monotone {
            m.insert("monotone".into(), json!(mono));
        }
        Value::Object(m)
    }

    fn csv_line(&self) -> String {
        let opt = |s: Option<String>| s.unwrap_or_default();
        [
            opt(self.basis.map(|v| v.to_string())),
            opt(self.qdeg.map(|v| v.to_string())),
            opt(self.logdeg.map(|v| v.to_string())),
            opt(self.t.map(|v| v.to_string())),
            opt(self.value.as_ref().map(Rendered::csv)),
            opt(self.target.as_ref().map(Rendered::csv)),
            opt(self.error.map(|v| v.to_string())),
        ]
        .join(",")
    }
}

#[derive(Clone, Copy, PartialEq, Eq, clap::ValueEnum)]
pub enum Format {
    Json,
    Csv,
}

pub struct Document {
    command: String,
    params: Map<String, Value>,
    rows: Vec<Row>,
    extra: Map<String, Value>,
}

impl Document {
    pub fn new(command: &str) -> Self {
        Document {
            command: command.to_string(),
            params: Map::new(),
            rows: Vec::new(),
            extra: Map::new(),
        }
    }

    pub fn param(&mut self, key: &str, value: Value) {
        self.params.insert(key.to_string(), value);
    }

    pub fn extra(&mut self, key: &str, value: Value) {
        self.extra.insert(key.to_string(), value);
    }

    pub fn push(&mut self, row: Row) {
        self.rows.push(row);
    }

    pub fn render(&self, format: Format) -> String {
        match format {
            Format::Json => {
                let mut top = Map::new();
                top.insert("schema".into(), json!(SCHEMA));
                top.insert("command".into(), json!(self.command));
                top.insert("params".into(), Value::Object(self.params.clone()));
                top.insert(
                    "rows".into(),
                    Value::Array(self.rows.iter().map(Row::json).collect()),
                );
                for (k, v) in &self.extra {
                    top.insert(k.clone(), v.clone());
                }
                let mut s = serde_json::to_string_pretty(&Value::Object(top))
                    .expect("report serializes");
                s.push('\n');
                s
            }
            Format::Csv => {
                let mut s = String::from("basis,qdeg,logdeg,t,value,target,error\n");
                for r in &self.rows {
                    s.push_str(&r.csv_line());
                    s.push('\n');
                }
                s
            }
        }
    }

    pub fn emit(&self, format: Format, output: &str) -> Result<(), Failure> {
        let body = self.render(format);
        if output == "-" {
            print!("{body}");
            Ok(())
        } else {
            std::fs::write(output, body)
                .map_err(|e| Failure::Config(format!("cannot write `{output}`: {e}")))
        }
    }
}
