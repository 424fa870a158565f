//! Coefficient fields for CAR polynomials.
//!
//! Symbolic work runs over exact Gaussian rationals so that nilpotency and
//! identity checks produce exact zeros. The floating `Complex64` field is used
//! where a real time parameter enters (Lie-series partial sums) and inside the
//! matrix backend.

use std::fmt;
use std::ops::{Add, Mul, Neg, Sub};

use num_bigint::BigInt;
use num_complex::{Complex, Complex64};
use num_rational::BigRational;
use num_traits::{One, Signed, ToPrimitive, Zero};

/// Exact complex rational.
pub type Exact = Complex<BigRational>;

/// Field operations needed by [`crate::car::CarPolynomial`].
pub trait Coefficient:
    Clone
    + PartialEq
    + fmt::Debug
    + Send
    + Sync
    + Zero
    + One
    + Add<Output = Self>
    + Sub<Output = Self>
    + Mul<Output = Self>
    + Neg<Output = Self>
    + 'static
{
    fn conjugate(&self) -> Self;
    fn imag_unit() -> Self;
    fn from_i64(v: i64) -> Self;
    fn to_c64(&self) -> Complex64;
    /// Magnitude used for pruning and reporting; exact for floats, rounded for rationals.
    fn magnitude(&self) -> f64 {
        self.to_c64().norm()
    }
    fn format(&self) -> String;
    fn product(&self, other: &Self) -> Self {
        self.clone() * other.clone()
    }
    fn sum(&self, other: &Self) -> Self {
        self.clone() + other.clone()
    }
}

impl Coefficient for Exact {
    fn conjugate(&self) -> Self {
        self.conj()
    }
    fn imag_unit() -> Self {
        Complex::new(BigRational::zero(), BigRational::one())
    }
    fn from_i64(v: i64) -> Self {
        Complex::new(BigRational::from_integer(BigInt::from(v)), BigRational::zero())
    }
    fn to_c64(&self) -> Complex64 {
        Complex64::new(
            self.re.to_f64().unwrap_or(f64::NAN),
            self.im.to_f64().unwrap_or(f64::NAN),
        )
    }
    fn product(&self, other: &Self) -> Self {
        if self.im.is_zero() && other.im.is_zero() {
            return Complex::new(ratio_mul(&self.re, &other.re), BigRational::zero());
        }
        Complex::new(
            ratio_sum(&ratio_mul(&self.re, &other.re), &-ratio_mul(&self.im, &other.im)),
            ratio_sum(&ratio_mul(&self.re, &other.im), &ratio_mul(&self.im, &other.re)),
        )
    }
    fn sum(&self, other: &Self) -> Self {
        Complex::new(ratio_sum(&self.re, &other.re), ratio_sum(&self.im, &other.im))
    }
    fn format(&self) -> String {
        if self.im.is_zero() {
            fmt_rational(&self.re)
        } else {
            format!("({},{})", fmt_rational(&self.re), fmt_rational(&self.im))
        }
    }
}

impl Coefficient for Complex64 {
    fn conjugate(&self) -> Self {
        self.conj()
    }
    fn imag_unit() -> Self {
        Complex64::i()
    }
    fn from_i64(v: i64) -> Self {
        Complex64::new(v as f64, 0.0)
    }
    fn to_c64(&self) -> Complex64 {
        *self
    }
    fn format(&self) -> String {
        if self.im == 0.0 {
            format!("{:e}", self.re)
        } else {
            format!("({:e},{:e})", self.re, self.im)
        }
    }
}

fn ratio_mul(a: &BigRational, b: &BigRational) -> BigRational {
    if a.is_zero() || b.is_zero() {
        BigRational::zero()
    } else if a.is_integer() && b.is_integer() {
        BigRational::from_integer(a.numer() * b.numer())
    } else {
        a * b
    }
}

fn ratio_sum(a: &BigRational, b: &BigRational) -> BigRational {
    if a.is_zero() {
        b.clone()
    } else if b.is_zero() {
        a.clone()
    } else if a.is_integer() && b.is_integer() {
        BigRational::from_integer(a.numer() + b.numer())
    } else {
        a + b
    }
}

fn fmt_rational(r: &BigRational) -> String {
    if r.is_integer() {
        r.numer().to_string()
    } else {
        format!("{}/{}", r.numer(), r.denom())
    }
}

/// Exact value from an integer pair `re + i im`.
pub fn exact(re: i64, im: i64) -> Exact {
    Complex::new(
        BigRational::from_integer(BigInt::from(re)),
        BigRational::from_integer(BigInt::from(im)),
    )
}

/// Exact rational `num/den` (real).
pub fn exact_ratio(num: i64, den: i64) -> Exact {
    Complex::new(
        BigRational::new(BigInt::from(num), BigInt::from(den)),
        BigRational::zero(),
    )
}

/// Parses a decimal or fraction literal (`-3`, `0.25`, `1/3`, `2.5e-1`) exactly.
pub fn parse_rational(text: &str) -> Option<BigRational> {
    let text = text.trim();
    if let Some((n, d)) = text.split_once('/') {
        let n = parse_rational(n)?;
        let d = parse_rational(d)?;
        if d.is_zero() {
            return None;
        }
        return Some(n / d);
    }
    let (mantissa, exponent) = match text.find(['e', 'E']) {
        Some(pos) => (&text[..pos], text[pos + 1..].parse::<i32>().ok()?),
        None => (text, 0),
    };
    let (neg, digits) = match mantissa.strip_prefix('-') {
        Some(rest) => (true, rest),
        None => (false, mantissa.strip_prefix('+').unwrap_or(mantissa)),
    };
    let (int_part, frac_part) = digits.split_once('.').unwrap_or((digits, ""));
    if int_part.is_empty() && frac_part.is_empty() {
        return None;
    }
    if !int_part.chars().chain(frac_part.chars()).all(|c| c.is_ascii_digit()) {
        return None;
    }
    let all: String = format!("{int_part}{frac_part}");
    let numer: BigInt = if all.is_empty() { BigInt::zero() } else { all.parse().ok()? };
    let scale = exponent - frac_part.len() as i32;
    let ten = BigInt::from(10);
    let mut value = BigRational::from_integer(numer);
    if scale >= 0 {
        value *= BigRational::from_integer(num_traits::pow(ten, scale as usize));
    } else {
        value /= BigRational::from_integer(num_traits::pow(ten, (-scale) as usize));
    }
    Some(if neg { -value } else { value })
}

/// Largest absolute numerator/denominator size, for diagnostics.
pub fn exact_bits(c: &Exact) -> u64 {
    [c.re.numer(), c.re.denom(), c.im.numer(), c.im.denom()]
        .iter()
        .map(|b| b.abs().bits())
        .max()
        .unwrap_or(0)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_literals_exactly() {
        assert_eq!(parse_rational("0.25").unwrap(), BigRational::new(1.into(), 4.into()));
        assert_eq!(parse_rational("-3").unwrap(), BigRational::from_integer((-3).into()));
        assert_eq!(parse_rational("1/3").unwrap(), BigRational::new(1.into(), 3.into()));
        assert_eq!(parse_rational("2.5e-1").unwrap(), BigRational::new(1.into(), 4.into()));
        assert!(parse_rational("1/0").is_none());
        assert!(parse_rational("x").is_none());
        assert!(parse_rational(".").is_none());
    }

    #[test]
    fn imaginary_unit_squares_to_minus_one() {
        let i = Exact::imag_unit();
        assert_eq!(i.clone() * i, exact(-1, 0));
        assert_eq!(exact(2, 3).conjugate(), exact(2, -3));
        assert_eq!(exact_ratio(1, 2).to_c64(), Complex64::new(0.5, 0.0));
    }
}
