//! Dyadic rounding of powers of two with rational exponents.
//!
//! `2^x` for non-integer rational `x` is irrational, so the value is bracketed
//! in fixed point (a series for `ln 2`, then a Taylor series for `exp` with an
//! explicit tail bound) and the precision doubles until both ends of the
//! bracket round to the same multiple of `2^-k`.

use std::fmt;

use num_bigint::{BigInt, BigUint, Sign};
use num_integer::Integer;
use num_rational::BigRational;
use num_traits::{One, Signed, ToPrimitive, Zero};

use crate::error::{Error, Result};

/// `numerator / 2^frac_bits`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DyadicRational {
    pub numerator: BigUint,
    pub frac_bits: u32,
}

impl DyadicRational {
    pub fn to_rational(&self) -> BigRational {
        BigRational::new(
            BigInt::from_biguint(Sign::Plus, self.numerator.clone()),
            BigInt::one() << self.frac_bits as usize,
        )
    }
}

impl fmt::Display for DyadicRational {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}/2^{}", self.numerator, self.frac_bits)
    }
}

fn shift(x: &BigInt, by: i64, round_up: bool) -> BigInt {
    if by >= 0 {
        x << by as usize
    } else {
        let d = BigInt::one() << (-by) as usize;
        if round_up {
            x.div_ceil(&d)
        } else {
            x.div_floor(&d)
        }
    }
}

/// Bounds on `ln 2 * 2^q`.
fn ln2_bounds(q: u32) -> (BigInt, BigInt) {
    // ln 2 = sum_{i>=1} 1 / (i 2^i); the tail after q+1 terms is below 2^-q
    let s = BigInt::one() << q as usize;
    let mut lo = BigInt::zero();
    let mut hi = BigInt::zero();
    for i in 1..=(q as usize + 1) {
        let d = BigInt::from(i) << i;
        lo += s.div_floor(&d);
        hi += s.div_ceil(&d);
    }
    (lo, hi + 1)
}

/// Lower bound on `exp(y / 2^q) * 2^q` for `0 <= y < 2^q`.
fn exp_lower(y: &BigInt, q: u32) -> BigInt {
    let s = BigInt::one() << q as usize;
    let mut term = s.clone();
    let mut sum = s.clone();
    let mut i = 1u64;
    loop {
        term = (&term * y).div_floor(&(&s * i));
        if term.is_zero() {
            return sum;
        }
        sum += &term;
        i += 1;
    }
}

/// Upper bound on `exp(y / 2^q) * 2^q` for `0 <= y < 2^q`.
fn exp_upper(y: &BigInt, q: u32) -> BigInt {
    let s = BigInt::one() << q as usize;
    let mut term = s.clone();
    let mut sum = s.clone();
    let mut i = 1u64;
    loop {
        term = (&term * y).div_ceil(&(&s * i));
        sum += &term;
        if term <= BigInt::one() {
            // remaining terms shrink by at least half each
            return sum + 2 * term;
        }
        i += 1;
    }
}

/// `(lo, hi)` with `lo <= 2^x * 2^p <= hi`; exact when `x` is an integer.
pub fn pow2_bounds(x: &BigRational, p: u32) -> (BigInt, BigInt) {
    let n = x.floor().to_integer();
    let f = x - BigRational::from_integer(n.clone());
    let n = n.to_i64().expect("exponent fits in i64");
    if f.is_zero() {
        let one = BigInt::one();
        return (shift(&one, n + p as i64, false), shift(&one, n + p as i64, true));
    }
    let q = p + 16;
    let (l_lo, l_hi) = ln2_bounds(q);
    let y_lo = (f.numer() * &l_lo).div_floor(f.denom());
    let y_hi = (f.numer() * &l_hi).div_ceil(f.denom());
    let e_lo = exp_lower(&y_lo, q);
    let e_hi = exp_upper(&y_hi, q);
    let by = n + p as i64 - q as i64;
    (shift(&e_lo, by, false), shift(&e_hi, by, true))
}

/// Smallest multiple of `2^-k` that is `>= 2^x`.
pub fn pow2_ceil(x: &BigRational, k: u32) -> DyadicRational {
    if x.is_integer() {
        let e = x.to_integer().to_i64().expect("exponent fits in i64") + k as i64;
        let numerator = if e >= 0 { BigUint::one() << e as usize } else { BigUint::one() };
        return DyadicRational { numerator, frac_bits: k };
    }
    let mut p = k + 32;
    loop {
        let (lo, hi) = pow2_bounds(x, p);
        let drop = -((p - k) as i64);
        let a = shift(&lo, drop, true);
        let b = shift(&hi, drop, true);
        if a == b {
            let numerator = a.to_biguint().expect("powers of two are positive");
            return DyadicRational { numerator, frac_bits: k };
        }
        p *= 2;
    }
}

/// `2^-v` rounded up to `k` fractional bits, for `0 <= v <= 2`.
pub fn dyadic_pow2_up(v: &BigRational, k: u32) -> Result<DyadicRational> {
    if v.is_negative() || *v > BigRational::from_integer(2.into()) {
        return Err(Error::InvalidArgument(format!("exponent {v} outside [0, 2]")));
    }
    if k == 0 {
        return Err(Error::InvalidArgument("need at least one fractional bit".into()));
    }
    Ok(pow2_ceil(&-v, k))
}

const MAX_PRECISION: u32 = 1 << 14;

fn two_pow(e: i64, p: u32) -> BigInt {
    shift(&BigInt::one(), e + p as i64, false)
}

/// Decides `2^-v + 2^-(k+3) < 2^(-v + 2^-k)` and
/// `2^-v - 2^-(k+4) > 2^(-v - 2^-k)` with certified intervals.
/// Returns `false` if either fails or cannot be decided.
pub fn rounding_window_holds(v: &BigRational, k: u32) -> bool {
    let nv = -v.clone();
    let delta = BigRational::new(BigInt::one(), BigInt::one() << k as usize);
    let up = &nv + &delta;
    let down = &nv - &delta;
    let mut p = k + 64;
    let mut upper_ok = false;
    let mut lower_ok = false;
    while p <= MAX_PRECISION {
        let (b_lo, b_hi) = pow2_bounds(&nv, p);
        if !upper_ok {
            let (u_lo, u_hi) = pow2_bounds(&up, p);
            let add = two_pow(-(k as i64) - 3, p);
            if &b_hi + &add < u_lo {
                upper_ok = true;
            } else if b_lo.clone() + &add >= u_hi {
                return false;
            }
        }
        if !lower_ok {
            let (d_lo, d_hi) = pow2_bounds(&down, p);
            let sub = two_pow(-(k as i64) - 4, p);
            if &b_lo - &sub > d_hi {
                lower_ok = true;
            } else if b_hi.clone() - &sub <= d_lo {
                return false;
            }
        }
        if upper_ok && lower_ok {
            return true;
        }
        p *= 2;
    }
    false
}

/// Decides `log2(1 + 2^(2x)) - x^4 - x - 1 >= 0`, i.e.
/// `1 + 2^(2x) >= 2^(x^4 + x + 1)`, with certified intervals.
pub fn log_sum_bound_holds(x: &BigRational) -> bool {
    let two = BigRational::from_integer(2.into());
    let lhs_exp = &two * x;
    let rhs_exp = x * x * x * x + x + BigRational::one();
    let mut p = 64;
    while p <= MAX_PRECISION {
        let (l_lo, l_hi) = pow2_bounds(&lhs_exp, p);
        let (r_lo, r_hi) = pow2_bounds(&rhs_exp, p);
        let one = BigInt::one() << p as usize;
        if &one + &l_lo >= r_hi {
            return true;
        }
        if &one + &l_hi < r_lo {
            return false;
        }
        p *= 2;
    }
    false
}
