//! Exact Gaussian-rational scalars.
//!
//! Every coefficient in the symbolic layer is `re + im·i` with both parts
//! arbitrary-precision rationals. There is no floating point here.

use std::fmt;
use std::ops::{Add, Mul, Neg, Sub};

use num_bigint::BigInt;
use num_rational::{BigRational, Rational64};
use num_traits::{One, Signed, ToPrimitive, Zero};

/// A Gaussian rational `re + im·i`.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Scalar {
    pub re: BigRational,
    pub im: BigRational,
}

impl Scalar {
    pub fn new(re: BigRational, im: BigRational) -> Self {
        Scalar { re, im }
    }

    pub fn zero() -> Self {
        Scalar::new(BigRational::zero(), BigRational::zero())
    }

    pub fn one() -> Self {
        Scalar::from_int(1)
    }

    /// The imaginary unit.
    pub fn i() -> Self {
        Scalar::new(BigRational::zero(), BigRational::one())
    }

    pub fn from_int(n: i64) -> Self {
        Scalar::new(BigRational::from_integer(BigInt::from(n)), BigRational::zero())
    }

    pub fn from_ratio(num: i64, den: i64) -> Self {
        Scalar::new(
            BigRational::new(BigInt::from(num), BigInt::from(den)),
            BigRational::zero(),
        )
    }

    pub fn from_rational(r: BigRational) -> Self {
        Scalar::new(r, BigRational::zero())
    }

    pub fn from_rational64(r: Rational64) -> Self {
        Scalar::from_ratio(*r.numer(), *r.denom())
    }

    pub fn is_zero(&self) -> bool {
        self.re.is_zero() && self.im.is_zero()
    }

    pub fn is_one(&self) -> bool {
        self.re.is_one() && self.im.is_zero()
    }

    pub fn is_real(&self) -> bool {
        self.im.is_zero()
    }

    pub fn is_positive_real(&self) -> bool {
        self.im.is_zero() && self.re.is_positive()
    }

    /// Multiplicative inverse, `None` for zero.
    pub fn inv(&self) -> Option<Scalar> {
        if self.is_zero() {
            return None;
        }
        let norm = &self.re * &self.re + &self.im * &self.im;
        Some(Scalar::new(&self.re / &norm, -&self.im / &norm))
    }

    pub fn div(&self, other: &Scalar) -> Option<Scalar> {
        other.inv().map(|inv| self * &inv)
    }

    /// Integer power; `None` when raising zero to a negative power.
    pub fn powi(&self, n: i64) -> Option<Scalar> {
        let base = if n < 0 { self.inv()? } else { self.clone() };
        let mut exp = n.unsigned_abs();
        let mut acc = Scalar::one();
        let mut sq = base;
        while exp > 0 {
            if exp & 1 == 1 {
                acc = &acc * &sq;
            }
            sq = &sq * &sq;
            exp >>= 1;
        }
        Some(acc)
    }

    /// Exact `self^(1/q)` for positive reals that are perfect q-th powers.
    pub fn exact_root(&self, q: u32) -> Option<Scalar> {
        if !self.is_positive_real() || q == 0 {
            return None;
        }
        let root = |n: &BigInt| {
            let r = n.nth_root(q);
            if num_traits::pow(r.clone(), q as usize) == *n {
                Some(r)
            } else {
                None
            }
        };
        let num = root(self.re.numer())?;
        let den = root(self.re.denom())?;
        Some(Scalar::from_rational(BigRational::new(num, den)))
    }

    /// Exact `self^r` when the result stays rational.
    pub fn exact_pow(&self, r: Rational64) -> Option<Scalar> {
        if r.is_integer() {
            return self.powi(r.to_integer());
        }
        let q = u32::try_from(*r.denom()).ok()?;
        self.exact_root(q)?.powi(*r.numer())
    }

    /// Rational part as an integer when the scalar is a real integer.
    pub fn as_integer(&self) -> Option<i64> {
        if self.im.is_zero() && self.re.is_integer() {
            self.re.to_integer().to_i64()
        } else {
            None
        }
    }

    /// Real rational representable with 64-bit parts.
    pub fn as_rational64(&self) -> Option<Rational64> {
        if !self.im.is_zero() {
            return None;
        }
        let n = self.re.numer().to_i64()?;
        let d = self.re.denom().to_i64()?;
        Some(Rational64::new(n, d))
    }

    pub fn to_f64_pair(&self) -> (f64, f64) {
        (ratio_to_f64(&self.re), ratio_to_f64(&self.im))
    }

    /// True if the scalar is real and negative, or purely imaginary with a
    /// negative imaginary part. Used by printers to hoist a leading minus.
    pub fn is_negative_like(&self) -> bool {
        if self.im.is_zero() {
            self.re.is_negative()
        } else if self.re.is_zero() {
            self.im.is_negative()
        } else {
            false
        }
    }
}

fn ratio_to_f64(r: &BigRational) -> f64 {
    match (r.numer().to_f64(), r.denom().to_f64()) {
        (Some(n), Some(d)) if n.is_finite() && d.is_finite() => n / d,
        _ => r.to_f64().unwrap_or(f64::NAN),
    }
}

/// Formats a rational as `n` or `n/d`.
pub fn fmt_ratio(r: &BigRational) -> String {
    if r.is_integer() {
        r.numer().to_string()
    } else {
        format!("{}/{}", r.numer(), r.denom())
    }
}

impl<'a> Add<&'a Scalar> for &'a Scalar {
    type Output = Scalar;
    fn add(self, rhs: &Scalar) -> Scalar {
        Scalar::new(&self.re + &rhs.re, &self.im + &rhs.im)
    }
}

impl<'a> Sub<&'a Scalar> for &'a Scalar {
    type Output = Scalar;
    fn sub(self, rhs: &Scalar) -> Scalar {
        Scalar::new(&self.re - &rhs.re, &self.im - &rhs.im)
    }
}

impl<'a> Mul<&'a Scalar> for &'a Scalar {
    type Output = Scalar;
    fn mul(self, rhs: &Scalar) -> Scalar {
        Scalar::new(
            &self.re * &rhs.re - &self.im * &rhs.im,
            &self.re * &rhs.im + &self.im * &rhs.re,
        )
    }
}

impl Neg for &Scalar {
    type Output = Scalar;
    fn neg(self) -> Scalar {
        Scalar::new(-&self.re, -&self.im)
    }
}

impl fmt::Display for Scalar {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.im.is_zero() {
            write!(f, "{}", fmt_ratio(&self.re))
        } else if self.re.is_zero() {
            if self.im.is_one() {
                write!(f, "i")
            } else if (-&self.im).is_one() {
                write!(f, "-i")
            } else {
                write!(f, "{}*i", fmt_ratio(&self.im))
            }
        } else {
            let sign = if self.im.is_negative() { '-' } else { '+' };
            let abs_im = self.im.abs();
            if abs_im.is_one() {
                write!(f, "({}{}i)", fmt_ratio(&self.re), sign)
            } else {
                write!(f, "({}{}{}*i)", fmt_ratio(&self.re), sign, fmt_ratio(&abs_im))
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn field_ops() {
        let a = Scalar::new(BigRational::new(1.into(), 2.into()), BigRational::one());
        let b = a.inv().unwrap();
        assert!((&a * &b).is_one());
        assert_eq!(&Scalar::i() * &Scalar::i(), Scalar::from_int(-1));
        assert!(Scalar::zero().inv().is_none());
    }

    #[test]
    fn powers_and_roots() {
        assert_eq!(Scalar::from_int(2).powi(-3).unwrap(), Scalar::from_ratio(1, 8));
        assert_eq!(
            Scalar::from_ratio(4, 9).exact_pow(Rational64::new(1, 2)),
            Some(Scalar::from_ratio(2, 3))
        );
        assert_eq!(Scalar::from_int(2).exact_pow(Rational64::new(1, 2)), None);
        assert_eq!(Scalar::from_int(-4).exact_pow(Rational64::new(1, 2)), None);
        assert_eq!(
            Scalar::from_int(8).exact_pow(Rational64::new(-2, 3)),
            Some(Scalar::from_ratio(1, 4))
        );
    }

    #[test]
    fn display() {
        assert_eq!(Scalar::from_ratio(2, 3).to_string(), "2/3");
        assert_eq!(Scalar::i().to_string(), "i");
        let z = Scalar::new(BigRational::one(), BigRational::from_integer((-2).into()));
        assert_eq!(z.to_string(), "(1-2*i)");
    }
}
