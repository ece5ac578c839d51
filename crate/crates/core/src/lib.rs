//! Cross-modal RGB/thermal feature fusion: tensors and convolution kernels
//! with explicit backward passes, the fusion blocks built from them, Haar
//! sub-band analysis, cost accounting, file formats and a CLI.
//!
//! Numerics are generic over [`Scalar`] (`f32` or `f64`). Stored features use
//! `f32`; gradient checks use `f64`. Every reduction accumulates in `f64`.

pub mod cli;
pub mod complexity;
pub mod error;
pub mod fusion;
pub mod io;
pub mod nn;
pub mod rng;
pub mod scalar;
pub mod tensor;
pub mod verify;
pub mod wavelet;

pub use error::{Axis, Error, Result};
pub use rng::Seed;
pub use scalar::Scalar;
pub use tensor::{Dims, Tensor};

pub type Tensor32 = Tensor<f32>;
pub type Tensor64 = Tensor<f64>;
pub type ConvWeights32 = nn::ConvWeights<f32>;
pub type ConvWeights64 = nn::ConvWeights<f64>;
pub type FusionLevelParams32 = fusion::FusionLevelParams<f32>;
pub type FusionLevelParams64 = fusion::FusionLevelParams<f64>;
pub type FusionParams32 = fusion::FusionParams<f32>;
pub type FusionParams64 = fusion::FusionParams<f64>;
pub type FeaturePyramid32 = fusion::FeaturePyramid<f32>;
pub type GrayImage64 = wavelet::GrayImage<f64>;
