//! Numeric backends: plain `f64` and exact big rationals.
//!
//! Every inference routine is generic over [`Prob`], so the same propagation
//! code runs in floating point for benchmarks and in exact arithmetic for
//! gadget certificates and oracle cross-checks.

use std::cmp::Ordering;
use std::fmt;

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, Signed, ToPrimitive, Zero};
use serde::{Deserialize, Serialize};

use crate::error::Error;
use crate::network::{Network, Params};

/// Which arithmetic a solve runs in.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Backend {
    Float,
    Rational,
}

impl fmt::Display for Backend {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Backend::Float => f.write_str("f64"),
            Backend::Rational => f.write_str("rational"),
        }
    }
}

/// A probability tagged with the backend that produced it.
#[derive(Debug, Clone, PartialEq)]
pub enum ProbValue {
    Float(f64),
    Rational(BigRational),
}

impl ProbValue {
    pub fn backend(&self) -> Backend {
        match self {
            ProbValue::Float(_) => Backend::Float,
            ProbValue::Rational(_) => Backend::Rational,
        }
    }

    pub fn to_f64(&self) -> f64 {
        match self {
            ProbValue::Float(v) => *v,
            ProbValue::Rational(r) => r.to_f64_lossy(),
        }
    }

    pub fn as_rational(&self) -> Option<&BigRational> {
        match self {
            ProbValue::Rational(r) => Some(r),
            ProbValue::Float(_) => None,
        }
    }
}

impl fmt::Display for ProbValue {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ProbValue::Float(v) => write!(f, "{v:e}"),
            ProbValue::Rational(r) => write!(f, "{}/{}", r.numer(), r.denom()),
        }
    }
}

/// Arithmetic needed by the propagation engines.
pub trait Prob: Clone + PartialOrd + fmt::Debug + Send + Sync + 'static {
    const BACKEND: Backend;

    fn zero() -> Self;
    fn one() -> Self;
    fn is_zero(&self) -> bool;
    fn add_assign_ref(&mut self, other: &Self);
    fn mul_ref(&self, other: &Self) -> Self;
    fn div_ref(&self, other: &Self) -> Self;
    /// Nearest `f64`, used for fast comparisons and reporting.
    fn approx(&self) -> f64;
    fn to_value(&self) -> ProbValue;

    /// CPT tables of `net` converted into this backend.
    fn tables(net: &Network) -> Result<Vec<Vec<Self>>, Error>;

    /// Total order on nonnegative values. `a_approx`/`b_approx` must be the
    /// cached [`Prob::approx`] of each side; exact backends fall back to the
    /// exact comparison only when the approximations are too close to call.
    fn cmp_with_hint(&self, a_approx: f64, other: &Self, b_approx: f64) -> Ordering;
}

impl Prob for f64 {
    const BACKEND: Backend = Backend::Float;

    fn zero() -> Self {
        0.0
    }
    fn one() -> Self {
        1.0
    }
    fn is_zero(&self) -> bool {
        *self == 0.0
    }
    fn add_assign_ref(&mut self, other: &Self) {
        *self += *other;
    }
    fn mul_ref(&self, other: &Self) -> Self {
        self * other
    }
    fn div_ref(&self, other: &Self) -> Self {
        self / other
    }
    fn approx(&self) -> f64 {
        *self
    }
    fn to_value(&self) -> ProbValue {
        ProbValue::Float(*self)
    }
    fn tables(net: &Network) -> Result<Vec<Vec<Self>>, Error> {
        Ok(match net.params() {
            Params::Float(t) => t.clone(),
            Params::Rational(t) => t
                .iter()
                .map(|row| row.iter().map(|r| r.to_f64_lossy()).collect())
                .collect(),
        })
    }
    fn cmp_with_hint(&self, _: f64, other: &Self, _: f64) -> Ordering {
        self.partial_cmp(other).unwrap_or(Ordering::Equal)
    }
}

impl Prob for BigRational {
    const BACKEND: Backend = Backend::Rational;

    fn zero() -> Self {
        Zero::zero()
    }
    fn one() -> Self {
        One::one()
    }
    fn is_zero(&self) -> bool {
        Zero::is_zero(self)
    }
    fn add_assign_ref(&mut self, other: &Self) {
        *self += other;
    }
    fn mul_ref(&self, other: &Self) -> Self {
        self * other
    }
    fn div_ref(&self, other: &Self) -> Self {
        self / other
    }
    fn approx(&self) -> f64 {
        self.to_f64_lossy()
    }
    fn to_value(&self) -> ProbValue {
        ProbValue::Rational(self.clone())
    }
    fn tables(net: &Network) -> Result<Vec<Vec<Self>>, Error> {
        match net.params() {
            Params::Rational(t) => Ok(t.clone()),
            Params::Float(_) => Err(Error::BackendMismatch {
                network: Backend::Float,
                requested: Backend::Rational,
            }),
        }
    }
    fn cmp_with_hint(&self, a: f64, other: &Self, b: f64) -> Ordering {
        // f64 conversion is within a few ulps for normal magnitudes
        const TINY: f64 = 1e-290;
        if a > TINY && b > TINY {
            if a > b * (1.0 + 1e-12) {
                return Ordering::Greater;
            }
            if b > a * (1.0 + 1e-12) {
                return Ordering::Less;
            }
        }
        self.cmp(other)
    }
}

/// Lossy conversion that also works when numerator and denominator overflow `f64`.
pub trait ToF64Lossy {
    fn to_f64_lossy(&self) -> f64;
}

impl ToF64Lossy for BigRational {
    fn to_f64_lossy(&self) -> f64 {
        if let Some(v) = self.to_f64() {
            if v.is_finite() {
                return v;
            }
        }
        // scale both parts down to 64 significant bits
        let n = self.numer();
        let d = self.denom();
        if n.is_zero() {
            return 0.0;
        }
        let nb = n.bits() as i64;
        let db = d.bits() as i64;
        let ns = (nb - 64).max(0);
        let ds = (db - 64).max(0);
        let nn = (n.abs() >> ns as usize).to_f64().unwrap_or(f64::MAX);
        let dd = (d >> ds as usize).to_f64().unwrap_or(f64::MAX);
        let sign = if n.is_negative() { -1.0 } else { 1.0 };
        sign * nn / dd * 2f64.powi((ns - ds) as i32)
    }
}

/// Exact rational from an `f64` (every finite double is a dyadic rational).
pub fn rational_from_f64(v: f64) -> Option<BigRational> {
    BigRational::from_float(v)
}

/// Parses `num/den` or a decimal literal (`0.25`, `1e-3`, `3`) exactly.
pub fn parse_exact(token: &str) -> Option<BigRational> {
    if let Some((n, d)) = token.split_once('/') {
        let n: BigInt = n.trim().parse().ok()?;
        let d: BigInt = d.trim().parse().ok()?;
        if d.is_zero() {
            return None;
        }
        return Some(BigRational::new(n, d));
    }
    parse_decimal_exact(token)
}

fn parse_decimal_exact(token: &str) -> Option<BigRational> {
    let (mantissa, exp) = match token.find(['e', 'E']) {
        Some(i) => (&token[..i], token[i + 1..].parse::<i32>().ok()?),
        None => (token, 0),
    };
    let (neg, mantissa) = match mantissa.strip_prefix('-') {
        Some(rest) => (true, rest),
        None => (false, mantissa.strip_prefix('+').unwrap_or(mantissa)),
    };
    let (int_part, frac_part) = mantissa.split_once('.').unwrap_or((mantissa, ""));
    if int_part.is_empty() && frac_part.is_empty() {
        return None;
    }
    if !int_part.chars().chain(frac_part.chars()).all(|c| c.is_ascii_digit()) {
        return None;
    }
    let digits = format!("{int_part}{frac_part}");
    let mut num: BigInt = if digits.is_empty() { BigInt::zero() } else { digits.parse().ok()? };
    if neg {
        num = -num;
    }
    let scale = exp - frac_part.len() as i32;
    let ten = BigInt::from(10u32);
    Some(if scale >= 0 {
        BigRational::from_integer(num * num_traits::pow(ten, scale as usize))
    } else {
        BigRational::new(num, num_traits::pow(ten, (-scale) as usize))
    })
}
