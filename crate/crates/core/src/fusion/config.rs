//! Per-level widths and group counts.

use crate::error::{Error, Result};
use crate::nn::ConvSpec;

use super::csp::CspShape;
use super::gates::{CcsgParams, ClkgParams};
use super::msfd::MsfdShape;

/// Group counts shared by every level.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct GroupConfig {
    pub msfd_shuffle: usize,
    pub msfd_groups: usize,
    pub ccsg_shuffle: usize,
    pub ccsg_groups: usize,
    pub tail_shuffle: usize,
    pub tail_groups: usize,
}

impl Default for GroupConfig {
    /// Four streams in the distillation concat, two modalities elsewhere.
    fn default() -> Self {
        GroupConfig {
            msfd_shuffle: 4,
            msfd_groups: 4,
            ccsg_shuffle: 2,
            ccsg_groups: 2,
            tail_shuffle: 2,
            tail_groups: 2,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct LevelConfig {
    /// Backbone stage, `3..=5`; the feature stride is `2^id`.
    pub id: u8,
    pub c_rgb: usize,
    pub c_ir: usize,
    pub groups: GroupConfig,
}

impl LevelConfig {
    pub fn new(id: u8, c_rgb: usize, c_ir: usize) -> Self {
        LevelConfig {
            id,
            c_rgb,
            c_ir,
            groups: GroupConfig::default(),
        }
    }

    pub fn stride(&self) -> usize {
        1usize << self.id
    }

    pub fn msfd_shape(&self) -> MsfdShape {
        MsfdShape {
            c_in: self.c_rgb,
            c_out: self.c_ir,
            shuffle_groups: self.groups.msfd_shuffle,
            groups: self.groups.msfd_groups,
        }
    }

    /// Width of the concatenated modalities.
    pub fn fused_width(&self) -> usize {
        2 * self.c_ir
    }

    pub fn tail_shape(&self) -> CspShape {
        let c = self.fused_width();
        CspShape {
            c_in: c,
            c_mid: c,
            c_out: c,
            shuffle_groups: self.groups.tail_shuffle,
            groups_g1: self.groups.tail_groups,
            groups_g2: self.groups.tail_groups,
        }
    }

    /// Every convolution of the level, named as in parameter files.
    pub fn conv_specs(&self) -> Vec<(String, ConvSpec)> {
        let m = self.msfd_shape();
        let [d3, d5, d5d] = m.branch_specs();
        let (mg1, mg2) = m.csp_shape().specs();
        let c = self.fused_width();
        let (ka, kb) = ClkgParams::<f32>::specs(c);
        let (tg1, tg2) = self.tail_shape().specs();
        [
            ("msfd.dw3", d3),
            ("msfd.dw5", d5),
            ("msfd.dw5d", d5d),
            ("msfd.csp.g1", mg1),
            ("msfd.csp.g2", mg2),
            ("ccsg.g", CcsgParams::<f32>::spec(c, self.groups.ccsg_groups)),
            ("clkg.dw_a", ka),
            ("clkg.dw_b", kb),
            ("csp_out.g1", tg1),
            ("csp_out.g2", tg2),
        ]
        .into_iter()
        .map(|(n, s)| (n.to_string(), s))
        .collect()
    }

    pub fn validate(&self) -> Result<()> {
        if !(3..=5).contains(&self.id) {
            return Err(Error::InvalidConfig(format!("level id {} outside 3..=5", self.id)));
        }
        if self.c_rgb == 0 || self.c_ir == 0 {
            return Err(Error::InvalidConfig(format!("level {} has a zero width", self.id)));
        }
        let div = |what, value: usize, divisor: usize| {
            if divisor == 0 || !value.is_multiple_of(divisor) {
                Err(Error::InvalidConfig(format!(
                    "level {}: {what} ({value}) not divisible by {divisor}",
                    self.id
                )))
            } else {
                Ok(())
            }
        };
        div("distillation concat width", 4 * self.c_rgb, self.groups.msfd_shuffle)?;
        div("gate width", self.fused_width(), self.groups.ccsg_shuffle)?;
        div("projection width", self.fused_width(), self.groups.tail_shuffle)?;
        for (name, spec) in self.conv_specs() {
            spec.validate()
                .map_err(|e| Error::InvalidConfig(format!("level {} {name}: {e}", self.id)))?;
        }
        Ok(())
    }
}

/// Fusion-module configuration for a whole pyramid.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FusionConfig {
    /// Nominal network input height and width.
    pub input_h: usize,
    pub input_w: usize,
    pub batch: usize,
    pub levels: Vec<LevelConfig>,
}

/// Default RGB widths per level (ResNet-18 stages 3-5).
pub const DEFAULT_RGB_WIDTHS: [usize; 3] = [128, 256, 512];
/// Default IR widths per level (ResNet-50 stages 3-5).
pub const DEFAULT_IR_WIDTHS: [usize; 3] = [512, 1024, 2048];

impl Default for FusionConfig {
    fn default() -> Self {
        FusionConfig {
            input_h: 640,
            input_w: 640,
            batch: 1,
            levels: (0..3)
                .map(|i| LevelConfig::new(3 + i as u8, DEFAULT_RGB_WIDTHS[i], DEFAULT_IR_WIDTHS[i]))
                .collect(),
        }
    }
}

impl FusionConfig {
    /// Spatial size of a level's features.
    pub fn level_hw(&self, level: &LevelConfig) -> (usize, usize) {
        (self.input_h / level.stride(), self.input_w / level.stride())
    }

    pub fn level(&self, id: u8) -> Option<&LevelConfig> {
        self.levels.iter().find(|l| l.id == id)
    }

    pub fn validate(&self) -> Result<()> {
        if self.batch == 0 {
            return Err(Error::InvalidConfig("batch must be positive".into()));
        }
        let mut prev = None;
        for l in &self.levels {
            l.validate()?;
            if prev.is_some_and(|p| p >= l.id) {
                return Err(Error::InvalidConfig("level ids must be strictly increasing".into()));
            }
            prev = Some(l.id);
            let s = l.stride();
            if self.input_h == 0
                || self.input_w == 0
                || !self.input_h.is_multiple_of(s)
                || !self.input_w.is_multiple_of(s)
            {
                return Err(Error::InvalidConfig(format!(
                    "input {}x{} not divisible by level {} stride {s}",
                    self.input_h, self.input_w, l.id
                )));
            }
        }
        Ok(())
    }

    /// Same configuration with every width multiplied by `k`; group counts
    /// are multiplied too when `scale_groups` is set.
    pub fn scaled(&self, k: usize, scale_groups: bool) -> Self {
        let mut out = self.clone();
        for l in &mut out.levels {
            l.c_rgb *= k;
            l.c_ir *= k;
            if scale_groups {
                let g = &mut l.groups;
                g.msfd_groups *= k;
                g.ccsg_groups *= k;
                g.tail_groups *= k;
            }
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_are_valid() {
        let cfg = FusionConfig::default();
        cfg.validate().unwrap();
        let sizes: Vec<_> = cfg.levels.iter().map(|l| cfg.level_hw(l)).collect();
        assert_eq!(sizes, vec![(80, 80), (40, 40), (20, 20)]);
    }

    #[test]
    fn invalid_levels_are_rejected() {
        let mut cfg = FusionConfig::default();
        cfg.levels[0].c_ir = 6; // 6 % 4 != 0 for the distillation output
        assert!(cfg.validate().is_err());
        let mut cfg = FusionConfig::default();
        cfg.levels.swap(0, 1);
        assert!(cfg.validate().is_err());
        let cfg = FusionConfig {
            input_h: 650,
            ..FusionConfig::default()
        };
        assert!(cfg.validate().is_err());
        assert!(LevelConfig::new(2, 8, 8).validate().is_err());
    }

    #[test]
    fn ten_convolutions_per_level() {
        let l = LevelConfig::new(3, 8, 8);
        let names: Vec<_> = l.conv_specs().into_iter().map(|(n, _)| n).collect();
        assert_eq!(names.len(), 10);
        assert_eq!(names[0], "msfd.dw3");
        assert_eq!(names[9], "csp_out.g2");
    }
}
