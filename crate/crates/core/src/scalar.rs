//! Numeric abstraction shared by the metrics and consistency code.
//!
//! Every rate in this crate is a ratio of two counts, so the only thing a
//! scalar has to support beyond field arithmetic is construction from a
//! `(numerator, denominator)` pair of counts and rounding for display.
//! Exact rationals give zero-tolerance results; floats are there for callers
//! who only want approximate numbers.

use std::fmt::{Debug, Display};
use std::str::FromStr;

use num_bigint::BigInt;
use num_integer::Integer;
use num_rational::Ratio;
use num_traits::{FromPrimitive, Num, ToPrimitive};

pub trait Scalar:
    Num + Clone + PartialOrd + Debug + Display + FromStr + Send + Sync + 'static
{
    /// `numerator / denominator`. The denominator must be non-zero.
    fn from_counts(numerator: u64, denominator: u64) -> Self;

    fn to_f64(&self) -> f64;

    /// Round half away from zero to `decimals` places, returned as a float
    /// for serialization.
    fn rounded(&self, decimals: u32) -> f64;
}

macro_rules! float_scalar {
    ($t:ty) => {
        impl Scalar for $t {
            fn from_counts(numerator: u64, denominator: u64) -> Self {
                assert!(denominator != 0, "zero denominator");
                (numerator as f64 / denominator as f64) as $t
            }

            fn to_f64(&self) -> f64 {
                *self as f64
            }

            fn rounded(&self, decimals: u32) -> f64 {
                let scale = 10f64.powi(decimals as i32);
                (*self as f64 * scale).round() / scale
            }
        }
    };
}

float_scalar!(f32);
float_scalar!(f64);

impl<T> Scalar for Ratio<T>
where
    T: Integer + Clone + Debug + Display + FromPrimitive + ToPrimitive + Send + Sync + 'static,
    Ratio<T>: FromStr,
{
    fn from_counts(numerator: u64, denominator: u64) -> Self {
        assert!(denominator != 0, "zero denominator");
        let num = T::from_u64(numerator).expect("count fits the integer type");
        let den = T::from_u64(denominator).expect("count fits the integer type");
        Ratio::new(num, den)
    }

    fn to_f64(&self) -> f64 {
        let num = self.numer().to_f64().unwrap_or(f64::NAN);
        let den = self.denom().to_f64().unwrap_or(f64::NAN);
        num / den
    }

    fn rounded(&self, decimals: u32) -> f64 {
        let scale = T::from_u64(10u64.pow(decimals)).expect("scale fits the integer type");
        let scaled = (self.clone() * Ratio::from_integer(scale)).round();
        scaled.to_integer().to_f64().unwrap_or(f64::NAN) / 10f64.powi(decimals as i32)
    }
}

/// Arbitrary-precision exact rational.
pub type Exact = Ratio<BigInt>;
