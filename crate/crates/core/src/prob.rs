//! Probabilities that are either exact rationals or log-space reals.

use core::fmt;

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, ToPrimitive, Zero};

/// Largest `n + m` evaluated exactly by [`Arithmetic::Auto`].
pub const EXACT_LIMIT: usize = 20;

/// How pmfs are evaluated.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Arithmetic {
    /// Exact when `n + m <= EXACT_LIMIT`, log-space otherwise.
    #[default]
    Auto,
    Exact,
    LogSpace,
}

impl Arithmetic {
    pub(crate) fn is_exact(self, n: usize, m: usize) -> bool {
        match self {
            Arithmetic::Auto => n + m <= EXACT_LIMIT,
            Arithmetic::Exact => true,
            Arithmetic::LogSpace => false,
        }
    }
}

/// A probability in `[0, 1]`.
#[derive(Clone, PartialEq)]
pub enum Probability {
    Exact(BigRational),
    /// Natural log of the probability (`-inf` for zero).
    Log(f64),
}

impl Probability {
    pub fn zero() -> Self {
        Probability::Exact(BigRational::zero())
    }

    pub fn one() -> Self {
        Probability::Exact(BigRational::one())
    }

    pub fn ratio(num: u64, den: u64) -> Self {
        Probability::Exact(BigRational::new(BigInt::from(num), BigInt::from(den)))
    }

    pub fn as_exact(&self) -> Option<&BigRational> {
        match self {
            Probability::Exact(r) => Some(r),
            Probability::Log(_) => None,
        }
    }

    pub fn into_exact(self) -> Option<BigRational> {
        match self {
            Probability::Exact(r) => Some(r),
            Probability::Log(_) => None,
        }
    }

    pub fn is_exact(&self) -> bool {
        matches!(self, Probability::Exact(_))
    }

    pub fn to_f64(&self) -> f64 {
        match self {
            Probability::Exact(r) => rational_to_f64(r),
            Probability::Log(l) => libm::exp(*l),
        }
    }

    pub fn ln(&self) -> f64 {
        match self {
            Probability::Exact(r) => {
                if r.is_zero() {
                    f64::NEG_INFINITY
                } else {
                    ln_rational(r)
                }
            }
            Probability::Log(l) => *l,
        }
    }

    /// Product; exact only if both factors are.
    pub fn mul(&self, other: &Probability) -> Probability {
        match (self, other) {
            (Probability::Exact(a), Probability::Exact(b)) => Probability::Exact(a * b),
            _ => Probability::Log(self.ln() + other.ln()),
        }
    }
}

impl fmt::Debug for Probability {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Probability::Exact(r) => write!(f, "Exact({r})"),
            Probability::Log(l) => write!(f, "Log({l}) ~ {}", libm::exp(*l)),
        }
    }
}

impl fmt::Display for Probability {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Probability::Exact(r) => write!(f, "{r}"),
            Probability::Log(l) => write!(f, "{}", libm::exp(*l)),
        }
    }
}

pub(crate) fn rational_to_f64(r: &BigRational) -> f64 {
    if let Some(v) = r.to_f64() {
        if v.is_finite() && (v != 0.0 || r.is_zero()) {
            return v;
        }
    }
    libm::exp(ln_rational(r))
}

fn ln_rational(r: &BigRational) -> f64 {
    ln_bigint(r.numer()) - ln_bigint(r.denom())
}

fn ln_bigint(x: &BigInt) -> f64 {
    let bits = x.bits();
    if bits <= 1000 {
        return libm::log(x.to_f64().unwrap_or(f64::INFINITY));
    }
    let shift = bits - 900;
    let head: BigInt = x >> shift;
    libm::log(head.to_f64().unwrap_or(f64::INFINITY)) + shift as f64 * core::f64::consts::LN_2
}

/// Exact rational value of a finite `f64`.
pub fn rational_from_f64(x: f64) -> BigRational {
    BigRational::from_float(x).expect("finite float")
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn conversions() {
        let p = Probability::ratio(1, 3);
        assert!((p.to_f64() - 1.0 / 3.0).abs() < 1e-16);
        assert!((p.ln() - (1.0f64 / 3.0).ln()).abs() < 1e-15);
        assert_eq!(Probability::zero().ln(), f64::NEG_INFINITY);
        let q = Probability::Log((0.25f64).ln());
        assert!((q.to_f64() - 0.25).abs() < 1e-15);
        assert!(!p.mul(&q).is_exact());
        assert_eq!(p.mul(&p), Probability::ratio(1, 9));
    }

    #[test]
    fn tiny_rationals_do_not_underflow_to_garbage() {
        let den = BigInt::from(10u32).pow(400);
        let r = BigRational::new(BigInt::from(3), den);
        let l = Probability::Exact(r).ln();
        assert!((l - (3f64.ln() - 400.0 * 10f64.ln())).abs() < 1e-9);
    }

    #[test]
    fn float_to_rational_is_exact() {
        assert_eq!(rational_from_f64(0.5), BigRational::new(1.into(), 2.into()));
    }
}
