//! Exact rational scalars and their one-point extension by `+∞`.
//!
//! Every quantity the decision procedures touch (breakpoints, function
//! values, integrals, norms) is a [`Scalar`]: an arbitrary-precision
//! rational kept in canonical form (reduced, positive denominator).
//! No floating point enters any comparison, so every predicate in the
//! crate is bit-reproducible.
//!
//! [`ExtendedScalar`] adds the single distinguished value `∞`, used for
//! right endpoints of half-line domains and for infinite measures of
//! superlevel sets. `∞` compares greater than every finite scalar and
//! absorbs addition; it is never produced by division.

use std::cmp::Ordering;
use std::fmt;
use std::ops::{Add, Div, Mul, Neg, Sub};
use std::str::FromStr;

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, Signed, ToPrimitive, Zero};
use serde::{Deserialize, Deserializer, Serialize, Serializer};

/// Exact rational number in canonical form.
#[derive(Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Scalar(BigRational);

impl Scalar {
    /// Builds `num/den`. Panics if `den == 0`.
    pub fn new(num: i64, den: i64) -> Self {
        assert!(den != 0, "zero denominator");
        Scalar(BigRational::new(BigInt::from(num), BigInt::from(den)))
    }

    pub fn from_int(n: i64) -> Self {
        Scalar(BigRational::from_integer(BigInt::from(n)))
    }

    pub fn zero() -> Self {
        Scalar(BigRational::zero())
    }

    pub fn one() -> Self {
        Scalar(BigRational::one())
    }

    pub fn is_zero(&self) -> bool {
        self.0.is_zero()
    }

    pub fn is_positive(&self) -> bool {
        self.0.is_positive()
    }

    pub fn is_negative(&self) -> bool {
        self.0.is_negative()
    }

    pub fn abs(&self) -> Self {
        Scalar(self.0.abs())
    }

    /// Sign as an integer in {-1, 0, 1}.
    pub fn sign(&self) -> i8 {
        match self.0.cmp(&BigRational::zero()) {
            Ordering::Less => -1,
            Ordering::Equal => 0,
            Ordering::Greater => 1,
        }
    }

    pub fn min(self, other: Self) -> Self {
        if self <= other {
            self
        } else {
            other
        }
    }

    pub fn max(self, other: Self) -> Self {
        if self >= other {
            self
        } else {
            other
        }
    }

    /// Exact halving, used by the witness generators' shrink loops.
    pub fn halved(&self) -> Self {
        Scalar(&self.0 / BigRational::from_integer(BigInt::from(2)))
    }

    pub fn recip(&self) -> Self {
        assert!(!self.is_zero(), "reciprocal of zero");
        Scalar(self.0.recip())
    }

    /// Exact conversion from a finite double (every finite f64 is rational).
    pub fn from_f64_exact(x: f64) -> Option<Self> {
        BigRational::from_float(x).map(Scalar)
    }

    /// Nearest rational with the given denominator (ties round up).
    pub fn from_f64_rounded(x: f64, denominator: u64) -> Option<Self> {
        let exact = BigRational::from_float(x)?;
        let den = BigInt::from(denominator);
        let scaled = exact * BigRational::from_integer(den.clone());
        let rounded = scaled.round();
        Some(Scalar(BigRational::new(rounded.to_integer(), den)))
    }

    /// Nearest double; exact when representable.
    pub fn to_f64(&self) -> f64 {
        self.0.to_f64().unwrap_or(f64::NAN)
    }

    pub fn numer(&self) -> &BigInt {
        self.0.numer()
    }

    pub fn denom(&self) -> &BigInt {
        self.0.denom()
    }
}

impl fmt::Display for Scalar {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.0.denom().is_one() {
            write!(f, "{}", self.0.numer())
        } else {
            write!(f, "{}/{}", self.0.numer(), self.0.denom())
        }
    }
}

impl fmt::Debug for Scalar {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{self}")
    }
}

/// Parse failures for the `"p/q"` textual form.
#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("invalid rational literal: {0}")]
pub struct ParseScalarError(String);

impl FromStr for Scalar {
    type Err = ParseScalarError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let s = s.trim();
        let mk_err = || ParseScalarError(s.to_string());
        match s.split_once('/') {
            Some((num, den)) => {
                let num: BigInt = num.trim().parse().map_err(|_| mk_err())?;
                let den: BigInt = den.trim().parse().map_err(|_| mk_err())?;
                if den.is_zero() {
                    return Err(mk_err());
                }
                Ok(Scalar(BigRational::new(num, den)))
            }
            None => {
                let num: BigInt = s.parse().map_err(|_| mk_err())?;
                Ok(Scalar(BigRational::from_integer(num)))
            }
        }
    }
}

macro_rules! scalar_binop {
    ($trait:ident, $method:ident) => {
        impl $trait for Scalar {
            type Output = Scalar;
            fn $method(self, rhs: Scalar) -> Scalar {
                Scalar((self.0).$method(rhs.0))
            }
        }
        impl<'a> $trait<&'a Scalar> for Scalar {
            type Output = Scalar;
            fn $method(self, rhs: &'a Scalar) -> Scalar {
                Scalar((self.0).$method(&rhs.0))
            }
        }
        impl<'a> $trait<Scalar> for &'a Scalar {
            type Output = Scalar;
            fn $method(self, rhs: Scalar) -> Scalar {
                Scalar((&self.0).$method(rhs.0))
            }
        }
        impl<'a, 'b> $trait<&'b Scalar> for &'a Scalar {
            type Output = Scalar;
            fn $method(self, rhs: &'b Scalar) -> Scalar {
                Scalar((&self.0).$method(&rhs.0))
            }
        }
    };
}

scalar_binop!(Add, add);
scalar_binop!(Sub, sub);
scalar_binop!(Mul, mul);

impl Div for Scalar {
    type Output = Scalar;
    fn div(self, rhs: Scalar) -> Scalar {
        assert!(!rhs.is_zero(), "division by zero");
        Scalar(self.0 / rhs.0)
    }
}

impl<'a> Div<&'a Scalar> for Scalar {
    type Output = Scalar;
    fn div(self, rhs: &'a Scalar) -> Scalar {
        assert!(!rhs.is_zero(), "division by zero");
        Scalar(self.0 / &rhs.0)
    }
}

impl<'a> Div<Scalar> for &'a Scalar {
    type Output = Scalar;
    fn div(self, rhs: Scalar) -> Scalar {
        assert!(!rhs.is_zero(), "division by zero");
        Scalar(&self.0 / rhs.0)
    }
}

impl<'a, 'b> Div<&'b Scalar> for &'a Scalar {
    type Output = Scalar;
    fn div(self, rhs: &'b Scalar) -> Scalar {
        assert!(!rhs.is_zero(), "division by zero");
        Scalar(&self.0 / &rhs.0)
    }
}

impl Neg for Scalar {
    type Output = Scalar;
    fn neg(self) -> Scalar {
        Scalar(-self.0)
    }
}

impl<'a> Neg for &'a Scalar {
    type Output = Scalar;
    fn neg(self) -> Scalar {
        Scalar(-&self.0)
    }
}

impl Serialize for Scalar {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        serializer.serialize_str(&self.to_string())
    }
}

impl<'de> Deserialize<'de> for Scalar {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        let s = String::deserialize(deserializer)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

/// A rational extended by the single value `∞`.
#[derive(Clone, PartialEq, Eq, Hash)]
pub enum ExtendedScalar {
    Finite(Scalar),
    Infinity,
}

impl ExtendedScalar {
    pub fn finite(s: Scalar) -> Self {
        ExtendedScalar::Finite(s)
    }

    pub fn from_int(n: i64) -> Self {
        ExtendedScalar::Finite(Scalar::from_int(n))
    }

    pub fn is_infinite(&self) -> bool {
        matches!(self, ExtendedScalar::Infinity)
    }

    pub fn as_finite(&self) -> Option<&Scalar> {
        match self {
            ExtendedScalar::Finite(s) => Some(s),
            ExtendedScalar::Infinity => None,
        }
    }

    /// Panics on `∞`; for call sites that already excluded it.
    pub fn expect_finite(&self) -> &Scalar {
        self.as_finite().expect("unexpected infinite value")
    }

    /// `∞` absorbs addition of any finite scalar.
    pub fn add_scalar(&self, s: &Scalar) -> ExtendedScalar {
        match self {
            ExtendedScalar::Finite(v) => ExtendedScalar::Finite(v + s),
            ExtendedScalar::Infinity => ExtendedScalar::Infinity,
        }
    }
}

impl PartialOrd for ExtendedScalar {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for ExtendedScalar {
    fn cmp(&self, other: &Self) -> Ordering {
        use ExtendedScalar::*;
        match (self, other) {
            (Infinity, Infinity) => Ordering::Equal,
            (Infinity, Finite(_)) => Ordering::Greater,
            (Finite(_), Infinity) => Ordering::Less,
            (Finite(a), Finite(b)) => a.cmp(b),
        }
    }
}

impl From<Scalar> for ExtendedScalar {
    fn from(s: Scalar) -> Self {
        ExtendedScalar::Finite(s)
    }
}

impl fmt::Display for ExtendedScalar {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ExtendedScalar::Finite(s) => write!(f, "{s}"),
            ExtendedScalar::Infinity => write!(f, "inf"),
        }
    }
}

impl fmt::Debug for ExtendedScalar {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{self}")
    }
}

impl FromStr for ExtendedScalar {
    type Err = ParseScalarError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let t = s.trim();
        if t.eq_ignore_ascii_case("inf") || t == "∞" {
            Ok(ExtendedScalar::Infinity)
        } else {
            t.parse().map(ExtendedScalar::Finite)
        }
    }
}

impl Serialize for ExtendedScalar {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        serializer.serialize_str(&self.to_string())
    }
}

impl<'de> Deserialize<'de> for ExtendedScalar {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        let s = String::deserialize(deserializer)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

/// Shorthand for `Scalar::new` used heavily in tests and examples.
pub fn rat(num: i64, den: i64) -> Scalar {
    Scalar::new(num, den)
}

/// Shorthand for an integer scalar.
pub fn int(n: i64) -> Scalar {
    Scalar::from_int(n)
}
