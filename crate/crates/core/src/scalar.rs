//! Exact scalars: arbitrary-precision rationals and the coefficient-ring
//! abstraction shared by polynomials over rationals and over nilpotent jets.

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, Zero};

use crate::error::{EngineError, Result};

/// The scalar field of the whole engine. Always stored reduced with a
/// positive denominator (`num-rational` maintains both invariants).
pub type Rat = BigRational;

pub fn rat(n: i64, d: i64) -> Rat {
    Rat::new(BigInt::from(n), BigInt::from(d))
}

pub fn rat_int(n: i64) -> Rat {
    Rat::from_integer(BigInt::from(n))
}

/// Parses `"3/2"`, `"-5"`, `"0"`.
pub fn parse_rat(s: &str) -> Result<Rat> {
    let s = s.trim();
    s.parse::<BigRational>().map_err(|e| EngineError::Parse {
        pos: 0,
        msg: format!("bad rational `{s}`: {e}"),
    })
}

/// Renders without a denominator when integral.
pub fn rat_to_string(r: &Rat) -> String {
    if r.denom().is_one() {
        r.numer().to_string()
    } else {
        format!("{}/{}", r.numer(), r.denom())
    }
}

/// Coefficient ring for [`crate::poly::Polynomial`]: the standard numeric
/// traits cover rationals and nilpotent jets alike.
pub trait Coeff:
    Clone
    + PartialEq
    + std::fmt::Debug
    + Zero
    + One
    + std::ops::Neg<Output = Self>
    + std::ops::Add<Output = Self>
    + std::ops::Mul<Output = Self>
{
}

impl<T> Coeff for T where
    T: Clone
        + PartialEq
        + std::fmt::Debug
        + Zero
        + One
        + std::ops::Neg<Output = T>
        + std::ops::Add<Output = T>
        + std::ops::Mul<Output = T>
{
}

/// Clears denominators of a slice of rationals, returning integers with the
/// same ratios. Used to feed fraction-free elimination.
pub fn clear_denominators(row: &[Rat]) -> Vec<BigInt> {
    let mut lcm = BigInt::one();
    for r in row {
        lcm = num_integer::lcm(lcm, r.denom().clone());
    }
    row.iter()
        .map(|r| r.numer() * (&lcm / r.denom()))
        .collect()
}
