//! Exact GELU, `x * Phi(x)`.
//!
//! `Phi(x) = erfc(-x / sqrt(2)) / 2`, evaluated with the complementary error
//! function so the left tail keeps full relative precision. `erfc` comes from
//! `libm` (the FreeBSD/musl rational approximations, below 1 ulp in `f64`).

use std::f64::consts::{FRAC_1_SQRT_2, PI};

use crate::error::Result;
use crate::scalar::Scalar;
use crate::tensor::Tensor;

/// Standard normal CDF.
#[inline]
pub fn normal_cdf(x: f64) -> f64 {
    0.5 * libm::erfc(-x * FRAC_1_SQRT_2)
}

/// Standard normal density.
#[inline]
pub fn normal_pdf(x: f64) -> f64 {
    (-0.5 * x * x).exp() / (2.0 * PI).sqrt()
}

#[inline]
pub fn gelu_scalar(x: f64) -> f64 {
    x * normal_cdf(x)
}

/// `Phi(x) + x * phi(x)`.
#[inline]
pub fn gelu_derivative(x: f64) -> f64 {
    normal_cdf(x) + x * normal_pdf(x)
}

pub fn gelu<T: Scalar>(t: &Tensor<T>) -> Tensor<T> {
    t.map(|v| T::from_f64(gelu_scalar(v.as_f64())))
}

/// Chain rule through GELU evaluated at the pre-activation `t`.
pub fn gelu_backward<T: Scalar>(t: &Tensor<T>, grad_out: &Tensor<T>) -> Result<Tensor<T>> {
    t.zip_with(grad_out, |x, g| T::from_f64(gelu_derivative(x.as_f64()) * g.as_f64()))
}
