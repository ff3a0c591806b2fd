//! Exact rational arithmetic helpers shared across the crate.
//!
//! All throughput and duty-factor algebra is done in `Rat` so that equality
//! checks in reports and tests are exact. Floating point appears only in the
//! eigenvalue and optimization routines of the `region` module, which carry
//! explicit tolerances.

use num::bigint::BigInt;
use num::traits::{One, Signed, Zero};

pub type Rat = num::BigRational;

/// `n / d` as a reduced rational. Panics if `d == 0`.
pub fn rat(n: i64, d: i64) -> Rat {
    Rat::new(BigInt::from(n), BigInt::from(d))
}

pub fn rat_int(n: i64) -> Rat {
    Rat::from_integer(BigInt::from(n))
}

pub fn rat_u64(n: u64) -> Rat {
    Rat::from_integer(BigInt::from(n))
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RationalParseError {
    pub input: String,
}

impl std::fmt::Display for RationalParseError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "invalid rational literal {:?}", self.input)
    }
}

impl std::error::Error for RationalParseError {}

/// Parses an integer (`-3`), a decimal (`0.25`), or a fraction (`3/4`).
/// Decimals convert exactly: `0.1` becomes `1/10`, not the nearest float.
pub fn parse_rational(text: &str) -> Result<Rat, RationalParseError> {
    let s = text.trim();
    let err = || RationalParseError {
        input: text.to_string(),
    };
    if s.is_empty() {
        return Err(err());
    }
    if let Some((num_part, den_part)) = s.split_once('/') {
        let n: BigInt = num_part.trim().parse().map_err(|_| err())?;
        let d: BigInt = den_part.trim().parse().map_err(|_| err())?;
        if d.is_zero() {
            return Err(err());
        }
        return Ok(Rat::new(n, d));
    }
    if let Some((int_part, frac_part)) = s.split_once('.') {
        if frac_part.is_empty() || !frac_part.bytes().all(|b| b.is_ascii_digit()) {
            return Err(err());
        }
        let negative = int_part.starts_with('-');
        let int_digits = if int_part == "-" || int_part.is_empty() {
            BigInt::zero()
        } else {
            int_part.parse().map_err(|_| err())?
        };
        let scale = BigInt::from(10u32).pow(frac_part.len() as u32);
        let frac_digits: BigInt = frac_part.parse().map_err(|_| err())?;
        let magnitude = int_digits.abs() * &scale + frac_digits;
        let signed = if negative { -magnitude } else { magnitude };
        return Ok(Rat::new(signed, scale));
    }
    let n: BigInt = s.parse().map_err(|_| err())?;
    Ok(Rat::from_integer(n))
}

/// Renders a rational as `p/q`, or plain `p` when the denominator is one.
pub fn format_rational(r: &Rat) -> String {
    if r.denom().is_one() {
        r.numer().to_string()
    } else {
        format!("{}/{}", r.numer(), r.denom())
    }
}

/// True when the value has no fractional part.
pub fn is_integer(r: &Rat) -> bool {
    r.denom().is_one()
}

/// Euclidean remainder of an integer rational modulo `m`, in `0..m`.
/// Panics if `r` is fractional.
pub fn integer_mod(r: &Rat, m: u64) -> u64 {
    assert!(is_integer(r), "integer_mod on fractional value");
    use num::traits::ToPrimitive;
    let modulus = BigInt::from(m);
    let mut rem = r.numer() % &modulus;
    if rem.is_negative() {
        rem += &modulus;
    }
    rem.to_u64().expect("residue fits in u64")
}
