//! Arbitrary-precision complex arithmetic built from a pair of MPFR floats.
//! Transcendental operations are computed with guard bits and rounded once.

use std::fmt;

use num_rational::BigRational;
use rug::float::Round;
use rug::ops::DivAssignRound;
use rug::{Float, Integer, Rational};

use crate::error::{Error, Result};

/// Extra working bits for compound operations; keeps results within a few
/// ulps of correctly rounded.
const GUARD: u32 = 64;

pub const MIN_PRECISION: u32 = 53;
pub const DEFAULT_PRECISION: u32 = 256;

/// Convert an exact rational to a correctly rounded `Float`.
pub fn float_from_bigrational(prec: u32, r: &BigRational) -> Float {
    let num = Integer::from_str_radix(&r.numer().to_str_radix(16), 16).expect("bigint radix");
    let den = Integer::from_str_radix(&r.denom().to_str_radix(16), 16).expect("bigint radix");
    Float::with_val(prec, Rational::from((num, den)))
}

/// Complex number with both parts at the same MPFR precision (>= 53 bits).
#[derive(Clone, Debug)]
pub struct ComplexAP {
    re: Float,
    im: Float,
}

impl ComplexAP {
    pub fn new(prec: u32, re: Float, im: Float) -> Self {
        assert!(prec >= MIN_PRECISION, "precision below 53 bits");
        ComplexAP {
            re: Float::with_val(prec, re),
            im: Float::with_val(prec, im),
        }
    }

    pub fn zero(prec: u32) -> Self {
        assert!(prec >= MIN_PRECISION, "precision below 53 bits");
        ComplexAP {
            re: Float::new(prec),
            im: Float::new(prec),
        }
    }

    pub fn one(prec: u32) -> Self {
        Self::from_f64(prec, 1.0, 0.0)
    }

    pub fn i(prec: u32) -> Self {
        Self::from_f64(prec, 0.0, 1.0)
    }

    pub fn from_f64(prec: u32, re: f64, im: f64) -> Self {
        assert!(prec >= MIN_PRECISION, "precision below 53 bits");
        ComplexAP {
            re: Float::with_val(prec, re),
            im: Float::with_val(prec, im),
        }
    }

    pub fn from_rationals(prec: u32, re: &BigRational, im: &BigRational) -> Self {
        ComplexAP {
            re: float_from_bigrational(prec, re),
            im: float_from_bigrational(prec, im),
        }
    }

    pub fn real_from_rational(prec: u32, re: &BigRational) -> Self {
        ComplexAP {
            re: float_from_bigrational(prec, re),
            im: Float::new(prec),
        }
    }

    /// Parse decimal strings for the real and imaginary parts.
    pub fn parse(prec: u32, re: &str, im: &str) -> std::result::Result<Self, rug::float::ParseFloatError> {
        Ok(ComplexAP {
            re: Float::with_val(prec, Float::parse(re)?),
            im: Float::with_val(prec, Float::parse(im)?),
        })
    }

    pub fn re(&self) -> &Float {
        &self.re
    }

    pub fn im(&self) -> &Float {
        &self.im
    }

    pub fn prec(&self) -> u32 {
        self.re.prec()
    }

    pub fn is_exactly_zero(&self) -> bool {
        self.re.is_zero() && self.im.is_zero()
    }

    /// Below the half-precision noise floor 2^(-prec/2).
    pub fn is_negligible(&self) -> bool {
        let th = Float::with_val(32, Float::i_exp(1, -(self.prec() as i32 / 2)));
        let are = Float::with_val(32, self.re.abs_ref());
        let aim = Float::with_val(32, self.im.abs_ref());
        are < th && aim < th
    }

    pub fn abs(&self) -> Float {
        Float::with_val(self.prec(), self.re.hypot_ref(&self.im))
    }

    pub fn abs2(&self) -> Float {
        let g = self.prec() + GUARD;
        let t1 = Float::with_val(g, self.re.square_ref());
        let t2 = Float::with_val(g, self.im.square_ref());
        Float::with_val(self.prec(), &t1 + &t2)
    }

    pub fn conj(&self) -> Self {
        ComplexAP {
            re: self.re.clone(),
            im: Float::with_val(self.prec(), -&self.im),
        }
    }

    pub fn add_c(&self, o: &Self) -> Self {
        let p = self.prec().max(o.prec());
        ComplexAP {
            re: Float::with_val(p, &self.re + &o.re),
            im: Float::with_val(p, &self.im + &o.im),
        }
    }

    pub fn sub_c(&self, o: &Self) -> Self {
        let p = self.prec().max(o.prec());
        ComplexAP {
            re: Float::with_val(p, &self.re - &o.re),
            im: Float::with_val(p, &self.im - &o.im),
        }
    }

    pub fn neg_c(&self) -> Self {
        ComplexAP {
            re: Float::with_val(self.prec(), -&self.re),
            im: Float::with_val(self.prec(), -&self.im),
        }
    }

    pub fn mul_c(&self, o: &Self) -> Self {
        let p = self.prec().max(o.prec());
        let g = p + GUARD;
        let ac = Float::with_val(g, &self.re * &o.re);
        let bd = Float::with_val(g, &self.im * &o.im);
        let ad = Float::with_val(g, &self.re * &o.im);
        let bc = Float::with_val(g, &self.im * &o.re);
        ComplexAP {
            re: Float::with_val(p, &ac - &bd),
            im: Float::with_val(p, &ad + &bc),
        }
    }

    pub fn mul_float(&self, f: &Float) -> Self {
        let p = self.prec().max(f.prec());
        ComplexAP {
            re: Float::with_val(p, &self.re * f),
            im: Float::with_val(p, &self.im * f),
        }
    }

    pub fn recip(&self) -> Result<Self> {
        if self.is_negligible() {
            return Err(Error::NearZeroDenominator(format!("{:e}", self.abs().to_f64())));
        }
        let p = self.prec();
        let g = p + GUARD;
        let d1 = Float::with_val(g, self.re.square_ref());
        let d2 = Float::with_val(g, self.im.square_ref());
        let d = Float::with_val(g, &d1 + &d2);
        let mut re = Float::with_val(g, &self.re);
        re.div_assign_round(&d, Round::Nearest);
        let mut im = Float::with_val(g, -&self.im);
        im.div_assign_round(&d, Round::Nearest);
        Ok(ComplexAP {
            re: Float::with_val(p, re),
            im: Float::with_val(p, im),
        })
    }

    pub fn div_c(&self, o: &Self) -> Result<Self> {
        Ok(self.mul_c(&o.recip()?))
    }

    pub fn exp(&self) -> Self {
        let p = self.prec();
        let g = p + GUARD;
        let m = Float::with_val(g, self.re.exp_ref());
        let c = Float::with_val(g, self.im.cos_ref());
        let s = Float::with_val(g, self.im.sin_ref());
        ComplexAP {
            re: Float::with_val(p, &m * &c),
            im: Float::with_val(p, &m * &s),
        }
    }

    /// Principal logarithm: imaginary part in (-pi, pi].
    pub fn ln(&self) -> Result<Self> {
        if self.is_exactly_zero() {
            return Err(Error::ZeroBase);
        }
        let p = self.prec();
        let g = p + GUARD;
        let h = Float::with_val(g, self.re.hypot_ref(&self.im));
        let lnh = Float::with_val(g, h.ln_ref());
        let arg = Float::with_val(g, self.im.atan2_ref(&self.re));
        Ok(ComplexAP {
            re: Float::with_val(p, lnh),
            im: Float::with_val(p, arg),
        })
    }

    /// exp(e * Log self) with the principal branch.
    pub fn pow(&self, e: &Self) -> Result<Self> {
        if self.is_exactly_zero() {
            return Err(Error::ZeroBase);
        }
        let l = self.ln_guarded(GUARD)?;
        Ok(l.mul_c(e).exp_rounded(self.prec().max(e.prec())))
    }

    fn ln_guarded(&self, extra: u32) -> Result<Self> {
        let w = ComplexAP {
            re: Float::with_val(self.prec() + extra, &self.re),
            im: Float::with_val(self.prec() + extra, &self.im),
        };
        w.ln()
    }

    fn exp_rounded(&self, prec: u32) -> Self {
        let e = self.exp();
        ComplexAP {
            re: Float::with_val(prec, e.re),
            im: Float::with_val(prec, e.im),
        }
    }

    pub fn pow_i64(&self, k: i64) -> Result<Self> {
        if k == 0 {
            return Ok(ComplexAP::one(self.prec()));
        }
        let base = if k < 0 { self.recip()? } else { self.clone() };
        let mut e = k.unsigned_abs();
        let mut acc = ComplexAP::one(self.prec());
        let mut b = base;
        while e > 0 {
            if e & 1 == 1 {
                acc = acc.mul_c(&b);
            }
            e >>= 1;
            if e > 0 {
                b = b.mul_c(&b);
            }
        }
        Ok(acc)
    }

    pub fn dist(&self, o: &Self) -> Float {
        self.sub_c(o).abs()
    }

    pub fn approx_eq(&self, o: &Self, tol: f64) -> bool {
        self.dist(o) < tol
    }

    /// Decimal strings with the given number of significant digits.
    pub fn to_decimal_strings(&self, digits: usize) -> (String, String) {
        (
            float_to_decimal(&self.re, digits),
            float_to_decimal(&self.im, digits),
        )
    }
}

/// Deterministic decimal rendering of a float.
pub fn float_to_decimal(f: &Float, digits: usize) -> String {
    if f.is_zero() {
        return "0".to_string();
    }
    f.to_string_radix(10, Some(digits.max(2)))
}

impl PartialEq for ComplexAP {
    fn eq(&self, other: &Self) -> bool {
        self.re == other.re && self.im == other.im
    }
}

impl std::ops::Add<&ComplexAP> for ComplexAP {
    type Output = ComplexAP;
    fn add(self, o: &ComplexAP) -> ComplexAP {
        self.add_c(o)
    }
}

impl std::ops::Sub<&ComplexAP> for ComplexAP {
    type Output = ComplexAP;
    fn sub(self, o: &ComplexAP) -> ComplexAP {
        self.sub_c(o)
    }
}

impl std::ops::Mul<&ComplexAP> for ComplexAP {
    type Output = ComplexAP;
    fn mul(self, o: &ComplexAP) -> ComplexAP {
        self.mul_c(o)
    }
}

impl std::ops::Neg for ComplexAP {
    type Output = ComplexAP;
    fn neg(self) -> ComplexAP {
        self.neg_c()
    }
}

impl fmt::Display for ComplexAP {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let digits = (self.prec() as f64 * std::f64::consts::LOG10_2).ceil() as usize + 1;
        let (re, im) = self.to_decimal_strings(digits);
        write!(f, "({re}, {im}i)")
    }
}
