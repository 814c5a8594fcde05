//! Exact rational frequencies.
//!
//! All resonance bookkeeping (zero-sum selection, tail partial sums) runs on
//! exact rationals so that "the frequencies sum to zero" is an integer
//! statement, never a floating-point tolerance. Conversion to `f64` happens
//! only at the final scalar multiplication.

use std::fmt;
use std::ops::{Add, Div, Mul, Neg, Sub};
use std::str::FromStr;

use num_rational::Ratio;
use num_traits::{Signed, ToPrimitive, Zero};

use crate::error::Error;

/// Largest denominator accepted when parsing decimal frequency strings.
pub const MAX_DECIMAL_DENOMINATOR: i128 = 1_000_000;

/// A reduced rational number with i128 backing.
///
/// i128 gives ample headroom: tail sums of up to ~8 frequencies with
/// denominators up to 10^6 stay far from overflow.
#[derive(Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Rational(Ratio<i128>);

impl Rational {
    pub fn new(numerator: i128, denominator: i128) -> Result<Self, Error> {
        if denominator == 0 {
            return Err(Error::InvalidRational(format!("{numerator}/0")));
        }
        Ok(Rational(Ratio::new(numerator, denominator)))
    }

    pub const fn zero() -> Self {
        Rational(Ratio::new_raw(0, 1))
    }

    pub fn from_integer(n: i128) -> Self {
        Rational(Ratio::from_integer(n))
    }

    pub fn numerator(&self) -> i128 {
        *self.0.numer()
    }

    /// Always positive in reduced form.
    pub fn denominator(&self) -> i128 {
        *self.0.denom()
    }

    pub fn is_zero(&self) -> bool {
        self.0.is_zero()
    }

    pub fn is_positive(&self) -> bool {
        self.0.is_positive()
    }

    pub fn abs(&self) -> Self {
        Rational(self.0.abs())
    }

    pub fn recip(&self) -> Result<Self, Error> {
        if self.is_zero() {
            return Err(Error::InvalidRational("division by zero".into()));
        }
        Ok(Rational(self.0.recip()))
    }

    pub fn to_f64(&self) -> f64 {
        self.0.to_f64().expect("rational out of f64 range")
    }

    /// Nearest rational with the given fixed denominator.
    pub fn quantize(x: f64, denominator: i128) -> Result<Self, Error> {
        if !x.is_finite() {
            return Err(Error::InvalidRational(format!("{x}")));
        }
        let scaled = x * denominator as f64;
        if scaled.abs() >= i128::MAX as f64 / 2.0 {
            return Err(Error::InvalidRational(format!("{x} too large")));
        }
        Rational::new(scaled.round() as i128, denominator)
    }
}

impl Add for Rational {
    type Output = Rational;
    fn add(self, rhs: Self) -> Self {
        Rational(self.0 + rhs.0)
    }
}

impl Sub for Rational {
    type Output = Rational;
    fn sub(self, rhs: Self) -> Self {
        Rational(self.0 - rhs.0)
    }
}

impl Mul for Rational {
    type Output = Rational;
    fn mul(self, rhs: Self) -> Self {
        Rational(self.0 * rhs.0)
    }
}

impl Div for Rational {
    type Output = Rational;
    fn div(self, rhs: Self) -> Self {
        Rational(self.0 / rhs.0)
    }
}

impl Neg for Rational {
    type Output = Rational;
    fn neg(self) -> Self {
        Rational(-self.0)
    }
}

impl fmt::Display for Rational {
    /// Canonical form: `p` for integers, `p/q` otherwise.
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.denominator() == 1 {
            write!(f, "{}", self.numerator())
        } else {
            write!(f, "{}/{}", self.numerator(), self.denominator())
        }
    }
}

impl fmt::Debug for Rational {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fmt::Display::fmt(self, f)
    }
}

impl FromStr for Rational {
    type Err = Error;

    /// Accepts `p`, `p/q`, and decimal strings such as `-0.125`.
    ///
    /// Decimal strings are read digit-exactly (e.g. `0.1` is 1/10); the
    /// reduced denominator must not exceed 10^6.
    fn from_str(s: &str) -> Result<Self, Error> {
        let s = s.trim();
        let bad = || Error::InvalidRational(s.to_string());
        if s.is_empty() {
            return Err(bad());
        }
        if let Some((num, den)) = s.split_once('/') {
            let n: i128 = num.trim().parse().map_err(|_| bad())?;
            let d: i128 = den.trim().parse().map_err(|_| bad())?;
            if d <= 0 {
                return Err(bad());
            }
            return Rational::new(n, d);
        }
        if let Some((int_part, frac_part)) = s.split_once('.') {
            let negative = int_part.trim_start().starts_with('-');
            let int_digits = int_part.trim_start_matches(['+', '-']);
            if !int_digits.chars().all(|c| c.is_ascii_digit())
                || frac_part.is_empty()
                || !frac_part.chars().all(|c| c.is_ascii_digit())
            {
                return Err(bad());
            }
            let int_val: i128 = if int_digits.is_empty() {
                0
            } else {
                int_digits.parse().map_err(|_| bad())?
            };
            let mut den: i128 = 1;
            let mut frac_val: i128 = 0;
            for c in frac_part.chars() {
                den = den.checked_mul(10).ok_or_else(bad)?;
                frac_val = frac_val
                    .checked_mul(10)
                    .and_then(|v| v.checked_add((c as u8 - b'0') as i128))
                    .ok_or_else(bad)?;
            }
            let mut value = Rational::new(int_val * den + frac_val, den)?;
            if negative {
                value = -value;
            }
            if value.denominator() > MAX_DECIMAL_DENOMINATOR {
                return Err(Error::InvalidRational(format!(
                    "{s}: denominator {} exceeds 10^6",
                    value.denominator()
                )));
            }
            return Ok(value);
        }
        let n: i128 = s.parse().map_err(|_| bad())?;
        Ok(Rational::from_integer(n))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_fractions_and_reduces() {
        let r: Rational = "6/4".parse().unwrap();
        assert_eq!((r.numerator(), r.denominator()), (3, 2));
        assert_eq!(r.to_string(), "3/2");
    }

    #[test]
    fn parses_decimals_exactly() {
        let r: Rational = "0.1".parse().unwrap();
        assert_eq!((r.numerator(), r.denominator()), (1, 10));
        let r: Rational = "-2.5".parse().unwrap();
        assert_eq!((r.numerator(), r.denominator()), (-5, 2));
        let r: Rational = "3".parse().unwrap();
        assert_eq!((r.numerator(), r.denominator()), (3, 1));
    }

    #[test]
    fn rejects_oversize_decimal_denominator() {
        assert!("0.1234567".parse::<Rational>().is_err());
        // exactly 10^6 is fine
        assert!("0.000001".parse::<Rational>().is_ok());
    }

    #[test]
    fn rejects_garbage() {
        for s in ["", "1/0", "1//2", "a", "1.2.3", "0x10"] {
            assert!(s.parse::<Rational>().is_err(), "{s} should not parse");
        }
    }

    #[test]
    fn arithmetic_is_exact() {
        let a: Rational = "1/3".parse().unwrap();
        let b: Rational = "1/6".parse().unwrap();
        assert_eq!(a + b, "1/2".parse().unwrap());
        assert_eq!(a - b, b);
        assert_eq!(a * b, "1/18".parse().unwrap());
        assert_eq!((a / b).to_string(), "2");
        assert!((a - a).is_zero());
    }

    #[test]
    fn quantize_rounds_to_fixed_denominator() {
        let r = Rational::quantize(0.25, 1_000_000).unwrap();
        assert_eq!(r, "1/4".parse().unwrap());
        let r = Rational::quantize(1e-7, 1_000_000).unwrap();
        assert!(r.is_zero());
    }
}
