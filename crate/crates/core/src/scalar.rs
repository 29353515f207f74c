//! Floating-point scalar abstraction shared by the numeric modules.

use std::fmt::{Debug, Display};
use std::iter::Sum;
use std::ops::{AddAssign, DivAssign, MulAssign, SubAssign};

use num_traits::{Float, FromPrimitive, ToPrimitive};

/// Real scalar type the probability, metric and head code is generic over.
///
/// Implemented for `f32` and `f64`. Everything that crosses a module
/// boundary into the optimizer or the Mahalanobis solvers is carried in
/// `f64`; `f32` exists for callers that want to score embeddings in their
/// storage precision.
pub trait Scalar:
    Float
    + FromPrimitive
    + ToPrimitive
    + Sum
    + AddAssign
    + SubAssign
    + MulAssign
    + DivAssign
    + Debug
    + Display
    + Default
    + Send
    + Sync
    + 'static
{
    /// Lossy conversion from an `f64` literal.
    fn lit(x: f64) -> Self;

    fn to_f64_lossy(self) -> f64;

    fn from_f32_lossy(x: f32) -> Self;

    fn to_f32_lossy(self) -> f32;
}

macro_rules! impl_scalar {
    ($($t:ty),*) => {
        $(
            impl Scalar for $t {
                #[inline]
                fn lit(x: f64) -> Self {
                    x as $t
                }
                #[inline]
                fn to_f64_lossy(self) -> f64 {
                    self as f64
                }
                #[inline]
                fn from_f32_lossy(x: f32) -> Self {
                    x as $t
                }
                #[inline]
                fn to_f32_lossy(self) -> f32 {
                    self as f32
                }
            }
        )*
    };
}

impl_scalar!(f32, f64);
