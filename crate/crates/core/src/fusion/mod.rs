//! The cross-modal fusion module: RGB distillation, shuffle gate,
//! large-kernel gate, shuffle projection, and pyramid orchestration.
//!
//! Every block has a forward function and a backward function returning the
//! input gradient together with parameter gradients laid out in the same
//! parameter struct.

pub mod block;
pub mod config;
pub mod csp;
pub mod gates;
pub mod msfd;
pub mod pyramid;

#[cfg(test)]
pub(crate) mod testing;

use crate::nn::ConvLayer;

pub use block::{
    fusion_block_backward, fusion_block_forward, fusion_level_backward, fusion_level_forward, BlockGrads,
    FusionLevelParams,
};
pub use config::{FusionConfig, GroupConfig, LevelConfig};
pub use csp::{csp_backward, csp_forward, CspParams, CspShape};
pub use gates::{ccsg_backward, ccsg_forward, clkg_backward, clkg_context, clkg_forward, CcsgParams, ClkgParams};
pub use msfd::{msfd_backward, msfd_forward, MsfdParams, MsfdShape};
pub use pyramid::{pyramid_fuse, FeaturePyramid, FusionParams, Modality};

/// Named access to the convolution layers inside a parameter struct.
pub trait Layers<T> {
    fn layers(&self) -> Vec<(String, &ConvLayer<T>)>;
    fn layers_mut(&mut self) -> Vec<(String, &mut ConvLayer<T>)>;

    fn param_count(&self) -> usize
    where
        T: crate::scalar::Scalar,
    {
        self.layers().iter().map(|(_, l)| l.weights.len()).sum()
    }
}
