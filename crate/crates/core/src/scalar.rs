//! Scalar coefficients with two numeric modes: IEEE `f64` for performance
//! paths and arbitrary-precision rationals for exact predicates and oracle
//! tests.

use std::fmt;
use std::str::FromStr;

use num::bigint::BigInt;
use num::rational::BigRational;
use num::{One, Signed, Zero};

/// Numeric mode of a multivector or kernel evaluation.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, serde::Serialize, serde::Deserialize)]
pub enum Mode {
    Float64,
    ExactRational,
}

impl fmt::Display for Mode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Mode::Float64 => write!(f, "float"),
            Mode::ExactRational => write!(f, "exact"),
        }
    }
}

/// A scalar in one of the two numeric modes.
///
/// Arithmetic between scalars of different modes is an internal invariant
/// violation: the public entry points (products, kernels, accumulators)
/// reject mixed modes before any arithmetic happens.
#[derive(Clone, Debug, PartialEq)]
pub enum Scalar {
    F64(f64),
    Rational(BigRational),
}

impl Scalar {
    pub fn zero(mode: Mode) -> Self {
        match mode {
            Mode::Float64 => Scalar::F64(0.0),
            Mode::ExactRational => Scalar::Rational(BigRational::zero()),
        }
    }

    pub fn one(mode: Mode) -> Self {
        match mode {
            Mode::Float64 => Scalar::F64(1.0),
            Mode::ExactRational => Scalar::Rational(BigRational::one()),
        }
    }

    pub fn from_i64(mode: Mode, v: i64) -> Self {
        match mode {
            Mode::Float64 => Scalar::F64(v as f64),
            Mode::ExactRational => Scalar::Rational(BigRational::from_integer(BigInt::from(v))),
        }
    }

    /// Exact rational `num/den`. Panics if `den == 0`.
    pub fn ratio(num: i64, den: i64) -> Self {
        Scalar::Rational(BigRational::new(BigInt::from(num), BigInt::from(den)))
    }

    pub fn mode(&self) -> Mode {
        match self {
            Scalar::F64(_) => Mode::Float64,
            Scalar::Rational(_) => Mode::ExactRational,
        }
    }

    pub fn is_zero(&self) -> bool {
        match self {
            Scalar::F64(v) => *v == 0.0,
            Scalar::Rational(r) => r.is_zero(),
        }
    }

    pub fn to_f64(&self) -> f64 {
        match self {
            Scalar::F64(v) => *v,
            Scalar::Rational(r) => rational_to_f64(r),
        }
    }

    pub fn abs(&self) -> Scalar {
        match self {
            Scalar::F64(v) => Scalar::F64(v.abs()),
            Scalar::Rational(r) => Scalar::Rational(r.abs()),
        }
    }

    pub fn neg(&self) -> Scalar {
        match self {
            Scalar::F64(v) => Scalar::F64(-v),
            Scalar::Rational(r) => Scalar::Rational(-r.clone()),
        }
    }

    pub fn add(&self, other: &Scalar) -> Scalar {
        match (self, other) {
            (Scalar::F64(a), Scalar::F64(b)) => Scalar::F64(a + b),
            (Scalar::Rational(a), Scalar::Rational(b)) => Scalar::Rational(a + b),
            _ => panic!("scalar mode mismatch in add"),
        }
    }

    pub fn sub(&self, other: &Scalar) -> Scalar {
        match (self, other) {
            (Scalar::F64(a), Scalar::F64(b)) => Scalar::F64(a - b),
            (Scalar::Rational(a), Scalar::Rational(b)) => Scalar::Rational(a - b),
            _ => panic!("scalar mode mismatch in sub"),
        }
    }

    pub fn mul(&self, other: &Scalar) -> Scalar {
        match (self, other) {
            (Scalar::F64(a), Scalar::F64(b)) => Scalar::F64(a * b),
            (Scalar::Rational(a), Scalar::Rational(b)) => Scalar::Rational(a * b),
            _ => panic!("scalar mode mismatch in mul"),
        }
    }

    /// Division; `None` when the divisor is zero.
    pub fn div(&self, other: &Scalar) -> Option<Scalar> {
        if other.is_zero() {
            return None;
        }
        Some(match (self, other) {
            (Scalar::F64(a), Scalar::F64(b)) => Scalar::F64(a / b),
            (Scalar::Rational(a), Scalar::Rational(b)) => Scalar::Rational(a / b),
            _ => panic!("scalar mode mismatch in div"),
        })
    }

    pub fn scale_i64(&self, k: i64) -> Scalar {
        self.mul(&Scalar::from_i64(self.mode(), k))
    }

    /// Exact square root of a non-negative rational when numerator and
    /// denominator are both perfect squares; `None` otherwise or in float
    /// mode (float callers take `to_f64().sqrt()` directly).
    pub fn sqrt_exact(&self) -> Option<Scalar> {
        match self {
            Scalar::F64(_) => None,
            Scalar::Rational(r) => {
                if r.is_negative() {
                    return None;
                }
                let num = r.numer();
                let den = r.denom();
                let sn = num.sqrt();
                let sd = den.sqrt();
                if &(&sn * &sn) == num && &(&sd * &sd) == den {
                    Some(Scalar::Rational(BigRational::new(sn, sd)))
                } else {
                    None
                }
            }
        }
    }

    /// Parse from the textual value-file form: plain decimal for float mode,
    /// `num/den` (or a plain integer) for exact mode.
    pub fn parse(mode: Mode, text: &str) -> Result<Scalar, String> {
        match mode {
            Mode::Float64 => text
                .trim()
                .parse::<f64>()
                .map(Scalar::F64)
                .map_err(|e| format!("invalid float literal `{text}`: {e}")),
            Mode::ExactRational => parse_rational(text).map(Scalar::Rational),
        }
    }
}

impl fmt::Display for Scalar {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Scalar::F64(v) => write!(f, "{v}"),
            Scalar::Rational(r) => {
                if r.denom().is_one() {
                    write!(f, "{}", r.numer())
                } else {
                    write!(f, "{}/{}", r.numer(), r.denom())
                }
            }
        }
    }
}

pub fn parse_rational(text: &str) -> Result<BigRational, String> {
    let t = text.trim();
    if let Some((n, d)) = t.split_once('/') {
        let num = BigInt::from_str(n.trim()).map_err(|e| format!("invalid numerator `{n}`: {e}"))?;
        let den = BigInt::from_str(d.trim()).map_err(|e| format!("invalid denominator `{d}`: {e}"))?;
        if den.is_zero() {
            return Err(format!("zero denominator in `{t}`"));
        }
        Ok(BigRational::new(num, den))
    } else {
        let num = BigInt::from_str(t).map_err(|e| format!("invalid integer literal `{t}`: {e}"))?;
        Ok(BigRational::from_integer(num))
    }
}

/// Exact-to-float conversion that survives numerators/denominators beyond
/// the `f64` integer range.
pub fn rational_to_f64(r: &BigRational) -> f64 {
    use num::ToPrimitive;
    if let (Some(n), Some(d)) = (r.numer().to_f64(), r.denom().to_f64()) {
        if n.is_finite() && d.is_finite() && d != 0.0 {
            return n / d;
        }
    }
    // fallback: scale down both parts by a common power of two
    let bits = r.numer().bits().max(r.denom().bits()) as i64;
    let shift = (bits - 500).max(0) as u64;
    let n = (r.numer() >> shift).to_f64().unwrap_or(f64::NAN);
    let d = (r.denom() >> shift).to_f64().unwrap_or(f64::NAN);
    n / d
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn mode_round_trip() {
        let s = Scalar::parse(Mode::ExactRational, "-3/4").unwrap();
        assert_eq!(s, Scalar::ratio(-3, 4));
        assert_eq!(s.to_string(), "-3/4");
        let f = Scalar::parse(Mode::Float64, "2.5").unwrap();
        assert_eq!(f, Scalar::F64(2.5));
    }

    #[test]
    fn exact_sqrt_perfect_square_only() {
        assert_eq!(Scalar::ratio(1, 4).sqrt_exact(), Some(Scalar::ratio(1, 2)));
        assert_eq!(Scalar::ratio(25, 9).sqrt_exact(), Some(Scalar::ratio(5, 3)));
        assert_eq!(Scalar::ratio(2, 1).sqrt_exact(), None);
        assert_eq!(Scalar::ratio(-1, 4).sqrt_exact(), None);
    }

    #[test]
    fn arithmetic_stays_exact() {
        let a = Scalar::ratio(1, 3);
        let b = Scalar::ratio(1, 6);
        assert_eq!(a.add(&b), Scalar::ratio(1, 2));
        assert_eq!(a.sub(&b), Scalar::ratio(1, 6));
        assert_eq!(a.mul(&b), Scalar::ratio(1, 18));
        assert_eq!(a.div(&b).unwrap(), Scalar::ratio(2, 1));
        assert!(b.sub(&b).is_zero());
    }
}
