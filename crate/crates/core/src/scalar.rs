//! Scalar abstraction for the exact kernels.
//!
//! Occupancy solves, probability tables and variational distances are written
//! once against [`Scalar`] and run on `f32`, `f64`, or exact
//! [`num_rational::BigRational`]. Anything needing `exp`/`ln` asks for
//! [`Real`] instead.

use std::fmt::{Debug, Display};

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{Float, FromPrimitive, Num, Signed, ToPrimitive};

/// A field element usable by the dense solvers.
pub trait Scalar:
    Clone + Debug + Display + PartialOrd + Num + Signed + FromPrimitive + ToPrimitive + Send + Sync
{
    /// `true` when arithmetic is exact (no rounding).
    const EXACT: bool;

    /// Lossy conversion used for reporting.
    fn to_f64_lossy(&self) -> f64 {
        self.to_f64().unwrap_or(f64::NAN)
    }

    /// Exact-as-possible conversion from a probability or coordinate.
    fn from_f64_exact(x: f64) -> Self;
}

/// Floating-point scalar: everything in [`Scalar`] plus transcendental functions.
pub trait Real: Scalar + Float + Copy {}

impl Scalar for f32 {
    const EXACT: bool = false;

    fn from_f64_exact(x: f64) -> Self {
        x as f32
    }
}

impl Scalar for f64 {
    const EXACT: bool = false;

    fn from_f64_exact(x: f64) -> Self {
        x
    }
}

impl Real for f32 {}
impl Real for f64 {}

impl Scalar for BigRational {
    const EXACT: bool = true;

    /// Binary expansion of the double, so `0.7` becomes the dyadic nearest to it.
    fn from_f64_exact(x: f64) -> Self {
        BigRational::from_float(x).unwrap_or_else(|| BigRational::from_integer(BigInt::from(0)))
    }
}
