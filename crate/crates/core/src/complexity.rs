//! Parameter and multiply-accumulate accounting.
//!
//! One MAC is one multiply plus one add inside a convolution window; bias
//! additions and activations are not counted. Padded taps count, so the
//! total matches the work of a direct loop. Only the fusion module itself
//! is covered: backbone and detector costs are outside this crate.

use crate::error::Result;
use crate::fusion::FusionConfig;
use crate::nn::ConvSpec;

/// `c_out · (c_in/g) · k² (+ c_out with bias)`.
pub fn count_params(spec: &ConvSpec) -> u64 {
    let w = (spec.c_out * spec.c_in_per_group() * spec.k * spec.k) as u64;
    w + if spec.bias { spec.c_out as u64 } else { 0 }
}

/// MACs for one `h x w` input image. With "same" padding this is
/// `c_out · (c_in/g) · k² · h · w`; otherwise the true output size is used,
/// and an empty output costs nothing.
pub fn count_macs(spec: &ConvSpec, h: usize, w: usize) -> u64 {
    let (Ok(oh), Ok(ow)) = (spec.output_len(h), spec.output_len(w)) else {
        return 0;
    };
    let per_pixel = (spec.c_out * spec.c_in_per_group() * spec.k * spec.k) as u64;
    per_pixel * oh as u64 * ow as u64
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LayerCost {
    /// `level{id}.{layer}`
    pub name: String,
    pub spec: ConvSpec,
    pub h: usize,
    pub w: usize,
    pub params: u64,
    pub macs: u64,
}

impl LayerCost {
    pub fn new(name: impl Into<String>, spec: ConvSpec, h: usize, w: usize) -> Self {
        LayerCost {
            name: name.into(),
            spec,
            h,
            w,
            params: count_params(&spec),
            macs: count_macs(&spec, h, w),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CostReport {
    pub config: FusionConfig,
    pub layers: Vec<LayerCost>,
    pub total_params: u64,
    pub total_macs: u64,
}

impl CostReport {
    pub fn from_layers(config: FusionConfig, layers: Vec<LayerCost>) -> Self {
        let total_params = layers.iter().map(|l| l.params).sum();
        let total_macs = layers.iter().map(|l| l.macs).sum();
        CostReport {
            config,
            layers,
            total_params,
            total_macs,
        }
    }

    /// `(params, macs)` summed over the layers of one level.
    pub fn level_totals(&self, id: u8) -> (u64, u64) {
        let prefix = format!("level{id}.");
        self.layers
            .iter()
            .filter(|l| l.name.starts_with(&prefix))
            .fold((0, 0), |(p, m), l| (p + l.params, m + l.macs))
    }
}

/// Every convolution of every level at the level's spatial size, per image.
pub fn report_fusion_config(cfg: &FusionConfig) -> Result<CostReport> {
    cfg.validate()?;
    let mut layers = Vec::new();
    for l in &cfg.levels {
        let (h, w) = cfg.level_hw(l);
        for (name, spec) in l.conv_specs() {
            layers.push(LayerCost::new(format!("level{}.{name}", l.id), spec, h, w));
        }
    }
    Ok(CostReport::from_layers(cfg.clone(), layers))
}
