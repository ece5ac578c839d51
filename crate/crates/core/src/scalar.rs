//! Element types the numerical kernels are generic over.

use std::fmt::{Debug, Display};

use num_traits::Float;

/// A floating-point element type for tensors and images.
///
/// Every kernel accumulates in `f64` and rounds once into `Self`, so the
/// conversions here are the only place precision is lost.
pub trait Scalar: Float + Debug + Display + Default + Send + Sync + 'static {
    /// Short name used in reports.
    const NAME: &'static str;

    fn from_f64(x: f64) -> Self;

    fn as_f64(self) -> f64;

    /// Largest representable value strictly below `self`.
    fn next_below(self) -> Self;

    /// Bit pattern widened to 64 bits, for bitwise comparisons.
    fn bits(self) -> u64;
}

impl Scalar for f32 {
    const NAME: &'static str = "f32";

    #[inline(always)]
    fn from_f64(x: f64) -> Self {
        x as f32
    }

    #[inline(always)]
    fn as_f64(self) -> f64 {
        self as f64
    }

    fn next_below(self) -> Self {
        next_below_bits(self.to_bits() as u64, 32, |b| f32::from_bits(b as u32), self)
    }

    #[inline(always)]
    fn bits(self) -> u64 {
        self.to_bits() as u64
    }
}

impl Scalar for f64 {
    const NAME: &'static str = "f64";

    #[inline(always)]
    fn from_f64(x: f64) -> Self {
        x
    }

    #[inline(always)]
    fn as_f64(self) -> f64 {
        self
    }

    fn next_below(self) -> Self {
        next_below_bits(self.to_bits(), 64, f64::from_bits, self)
    }

    #[inline(always)]
    fn bits(self) -> u64 {
        self.to_bits()
    }
}

fn next_below_bits<T: Float>(bits: u64, width: u32, from: impl Fn(u64) -> T, value: T) -> T {
    let sign = 1u64 << (width - 1);
    if value.is_nan() || value == T::neg_infinity() {
        return value;
    }
    if value == T::zero() {
        // smallest negative subnormal
        return from(sign | 1);
    }
    if bits & sign == 0 {
        from(bits - 1)
    } else {
        from(bits + 1)
    }
}
