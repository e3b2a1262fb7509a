//! Exact rational scalars.
//!
//! `Rat` is `num_rational::BigRational`, which already maintains the two
//! invariants we rely on everywhere: fully reduced and positive denominator.

use num_bigint::BigInt;
use num_traits::{One, Signed, Zero};

pub type Rat = num_rational::BigRational;

pub fn rat_int(i: impl Into<BigInt>) -> Rat {
    Rat::from_integer(i.into())
}

pub fn rat(num: i64, den: i64) -> Rat {
    Rat::new(BigInt::from(num), BigInt::from(den))
}

pub fn is_integer(r: &Rat) -> bool {
    r.denom().is_one()
}

/// The integer value of `r`, if it has one.
pub fn to_integer(r: &Rat) -> Option<BigInt> {
    is_integer(r).then(|| r.numer().clone())
}

/// `b^e` for a non-negative exponent; rationals make negative `b` fine.
pub fn pow_bigint(b: &BigInt, e: u32) -> BigInt {
    b.pow(e)
}

/// `b^e` for possibly negative integer exponents (`b != 0` when `e < 0`).
pub fn rat_pow(b: &BigInt, e: &BigInt) -> Option<Rat> {
    let mag: u32 = e.abs().try_into().ok()?;
    let p = rat_int(b.pow(mag));
    if e.is_negative() {
        if p.is_zero() {
            return None;
        }
        Some(p.recip())
    } else {
        Some(p)
    }
}
