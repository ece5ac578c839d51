//! Neural primitives with explicit backward passes.

pub mod conv;
pub mod gelu;
pub mod gradcheck;
pub mod shuffle;

pub use conv::{conv2d, conv2d_backward, conv2d_reference, ConvGrad, ConvLayer, ConvSpec, ConvWeights};
pub use gelu::{gelu, gelu_backward};
pub use gradcheck::{check_gradient, finite_diff_grad, max_relative_error, relative_error, sample_coords, GradCheck};
pub use shuffle::{channel_shuffle, channel_shuffle_backward, shuffle_permutation};
