//! Exact scalars used throughout the crate.
//!
//! Every verdict in this crate is computed over [`Rat`] (arbitrary precision
//! rationals). [`ExtReal`] adds the two infinities needed for lower
//! semicontinuous convex functions, and [`exp_bounds`] gives rigorous
//! rational enclosures of `e^x` for the analytic cost families.

use std::cmp::Ordering;
use std::fmt;

use num_bigint::BigInt;
use num_integer::Integer;
use num_rational::BigRational;
use num_traits::{One, Signed, ToPrimitive, Zero};
use thiserror::Error;

pub type Rat = BigRational;

pub fn int(n: i64) -> Rat {
    Rat::from_integer(BigInt::from(n))
}

pub fn frac(n: i64, d: i64) -> Rat {
    Rat::new(BigInt::from(n), BigInt::from(d))
}

pub fn to_f64(r: &Rat) -> f64 {
    r.to_f64().unwrap_or(f64::NAN)
}

/// Exact rational value of a finite `f64`.
pub fn from_f64(x: f64) -> Option<Rat> {
    Rat::from_float(x)
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("cannot parse {text:?} as an exact number: {reason}")]
pub struct ParseNumError {
    pub text: String,
    pub reason: &'static str,
}

fn bad(text: &str, reason: &'static str) -> ParseNumError {
    ParseNumError {
        text: text.to_string(),
        reason,
    }
}

/// Parses integers, decimals (`-12.5`, `3e-4`) and fractions (`7/3`) exactly.
pub fn parse_rat(text: &str) -> Result<Rat, ParseNumError> {
    let s = text.trim();
    if s.is_empty() {
        return Err(bad(text, "empty"));
    }
    if let Some((n, d)) = s.split_once('/') {
        let n = parse_rat(n)?;
        let d = parse_rat(d)?;
        if d.is_zero() {
            return Err(bad(text, "zero denominator"));
        }
        return Ok(n / d);
    }
    let (negative, body) = match s.as_bytes()[0] {
        b'-' => (true, &s[1..]),
        b'+' => (false, &s[1..]),
        _ => (false, s),
    };
    let (mantissa, exponent) = match body.find(['e', 'E']) {
        Some(i) => {
            let e: i32 = body[i + 1..]
                .parse()
                .map_err(|_| bad(text, "malformed exponent"))?;
            (&body[..i], e)
        }
        None => (body, 0),
    };
    let (whole, fraction) = mantissa.split_once('.').unwrap_or((mantissa, ""));
    if whole.is_empty() && fraction.is_empty() {
        return Err(bad(text, "no digits"));
    }
    if !whole.bytes().chain(fraction.bytes()).all(|b| b.is_ascii_digit()) {
        return Err(bad(text, "unexpected character"));
    }
    let digits = format!("{whole}{fraction}");
    let numer: BigInt = digits.parse().map_err(|_| bad(text, "no digits"))?;
    let scale = exponent - fraction.len() as i32;
    let ten = BigInt::from(10);
    let mut value = Rat::from_integer(numer);
    if scale >= 0 {
        value *= Rat::from_integer(num_traits::pow(ten, scale as usize));
    } else {
        value /= Rat::from_integer(num_traits::pow(ten, (-scale) as usize));
    }
    Ok(if negative { -value } else { value })
}

/// Like [`parse_rat`] but also accepts `inf`, `+inf`, `-inf`, `infinity`.
pub fn parse_ext(text: &str) -> Result<ExtReal, ParseNumError> {
    match text.trim().to_ascii_lowercase().as_str() {
        "inf" | "+inf" | "infinity" | "+infinity" => Ok(ExtReal::PosInf),
        "-inf" | "-infinity" => Ok(ExtReal::NegInf),
        _ => parse_rat(text).map(ExtReal::Finite),
    }
}

/// Extended real number. Addition follows the convex-analysis rule
/// `+inf + -inf = +inf`; scaling by zero gives zero.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub enum ExtReal {
    NegInf,
    Finite(Rat),
    PosInf,
}

impl ExtReal {
    pub fn zero() -> Self {
        ExtReal::Finite(Rat::zero())
    }

    pub fn finite(&self) -> Option<&Rat> {
        match self {
            ExtReal::Finite(r) => Some(r),
            _ => None,
        }
    }

    pub fn is_finite(&self) -> bool {
        matches!(self, ExtReal::Finite(_))
    }

    pub fn is_pos_inf(&self) -> bool {
        matches!(self, ExtReal::PosInf)
    }

    pub fn from_upper(bound: Option<Rat>) -> Self {
        bound.map_or(ExtReal::PosInf, ExtReal::Finite)
    }

    pub fn from_lower(bound: Option<Rat>) -> Self {
        bound.map_or(ExtReal::NegInf, ExtReal::Finite)
    }

    pub fn add(&self, other: &ExtReal) -> ExtReal {
        match (self, other) {
            (ExtReal::PosInf, _) | (_, ExtReal::PosInf) => ExtReal::PosInf,
            (ExtReal::NegInf, _) | (_, ExtReal::NegInf) => ExtReal::NegInf,
            (ExtReal::Finite(a), ExtReal::Finite(b)) => ExtReal::Finite(a + b),
        }
    }

    pub fn add_rat(&self, r: &Rat) -> ExtReal {
        self.add(&ExtReal::Finite(r.clone()))
    }

    /// Multiplication by a nonnegative scalar with `0 * inf = 0`.
    pub fn scale(&self, s: &Rat) -> ExtReal {
        debug_assert!(!s.is_negative());
        if s.is_zero() {
            return ExtReal::zero();
        }
        match self {
            ExtReal::Finite(r) => ExtReal::Finite(r * s),
            other => other.clone(),
        }
    }

    pub fn neg(&self) -> ExtReal {
        match self {
            ExtReal::NegInf => ExtReal::PosInf,
            ExtReal::PosInf => ExtReal::NegInf,
            ExtReal::Finite(r) => ExtReal::Finite(-r),
        }
    }

    pub fn to_f64(&self) -> f64 {
        match self {
            ExtReal::NegInf => f64::NEG_INFINITY,
            ExtReal::PosInf => f64::INFINITY,
            ExtReal::Finite(r) => to_f64(r),
        }
    }
}

impl From<Rat> for ExtReal {
    fn from(r: Rat) -> Self {
        ExtReal::Finite(r)
    }
}

impl PartialOrd for ExtReal {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for ExtReal {
    fn cmp(&self, other: &Self) -> Ordering {
        use ExtReal::*;
        match (self, other) {
            (NegInf, NegInf) | (PosInf, PosInf) => Ordering::Equal,
            (NegInf, _) | (_, PosInf) => Ordering::Less,
            (_, NegInf) | (PosInf, _) => Ordering::Greater,
            (Finite(a), Finite(b)) => a.cmp(b),
        }
    }
}

impl fmt::Display for ExtReal {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ExtReal::NegInf => write!(f, "-inf"),
            ExtReal::PosInf => write!(f, "inf"),
            ExtReal::Finite(r) => write!(f, "{r}"),
        }
    }
}

const EXP_BITS: usize = 160;

fn pow2(bits: usize) -> BigInt {
    BigInt::one() << bits
}

/// Largest multiple of `2^-bits` not above `x`.
pub fn round_down(x: &Rat, bits: usize) -> Rat {
    let scale = pow2(bits);
    let scaled = x.numer() * &scale;
    Rat::new(scaled.div_floor(x.denom()), scale)
}

fn round_up(x: &Rat, bits: usize) -> Rat {
    let scale = pow2(bits);
    let scaled = x.numer() * &scale;
    Rat::new(scaled.div_ceil(x.denom()), scale)
}

/// Rigorous enclosure `lo <= e^x <= hi` with relative width around 2^-140.
///
/// Range reduction by halving, a Taylor sum with an explicit remainder
/// bound, then repeated squaring with outward rounding.
pub fn exp_bounds(x: &Rat) -> (Rat, Rat) {
    if x.is_zero() {
        return (Rat::one(), Rat::one());
    }
    let half = frac(1, 2);
    let mut halvings = 0usize;
    let mut b = x.abs();
    while b > half {
        b /= int(2);
        halvings += 1;
    }
    // Taylor sum for e^b, 0 < b <= 1/2.
    const TERMS: usize = 40;
    let mut term = Rat::one();
    let mut sum = Rat::one();
    for k in 1..=TERMS {
        term = round_down(&(&term * &b / int(k as i64)), EXP_BITS + 32);
        sum += &term;
    }
    // The rounded-down terms make `sum` a lower bound. The gap is the
    // remainder 2 b^41 / 41! < 2^-200 plus at most TERMS * 2^-(EXP_BITS+32)
    // of accumulated rounding.
    let slack = Rat::new(BigInt::one(), pow2(200)) + Rat::new(BigInt::from(TERMS as i64), pow2(EXP_BITS + 32));
    let mut lo = round_down(&sum, EXP_BITS);
    let mut hi = round_up(&(sum + slack), EXP_BITS);
    if x.is_negative() {
        let (l, h) = (round_down(&hi.recip(), EXP_BITS), round_up(&lo.recip(), EXP_BITS));
        lo = l;
        hi = h;
    }
    for _ in 0..halvings {
        lo = round_down(&(&lo * &lo), EXP_BITS);
        hi = round_up(&(&hi * &hi), EXP_BITS);
    }
    (lo, hi)
}
