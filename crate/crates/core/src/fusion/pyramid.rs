//! Multi-level feature pyramids and level-wise fusion.

use std::collections::BTreeMap;
use std::fmt;

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::rng::Seed;
use crate::scalar::Scalar;
use crate::tensor::Tensor;

use super::block::{fusion_level_forward, FusionLevelParams};
use super::config::FusionConfig;
use super::Layers;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Modality {
    Rgb,
    Ir,
    Fused,
}

impl fmt::Display for Modality {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Modality::Rgb => "rgb",
            Modality::Ir => "ir",
            Modality::Fused => "fused",
        })
    }
}

/// Backbone features for stages 3-5 (any ordered subset).
///
/// Spatial size halves from one stage to the next; all levels share the
/// batch size.
#[derive(Debug, Clone, PartialEq)]
pub struct FeaturePyramid<T> {
    modality: Modality,
    levels: Vec<(u8, Tensor<T>)>,
}

impl<T: Scalar> FeaturePyramid<T> {
    pub fn new(modality: Modality, mut levels: Vec<(u8, Tensor<T>)>) -> Result<Self> {
        if levels.is_empty() {
            return Err(Error::Pyramid("no levels".into()));
        }
        levels.sort_by_key(|(id, _)| *id);
        for w in levels.windows(2) {
            let ((a, ta), (b, tb)) = (&w[0], &w[1]);
            if a == b {
                return Err(Error::Pyramid(format!("duplicate level {a}")));
            }
            let f = 1usize << (b - a);
            let (da, db) = (ta.dims(), tb.dims());
            if da.n != db.n {
                return Err(Error::Pyramid(format!("batch differs between levels {a} and {b}")));
            }
            if da.h != f * db.h || da.w != f * db.w {
                return Err(Error::Pyramid(format!(
                    "level {a} is {}x{} but level {b} is {}x{}; expected a factor of {f}",
                    da.h, da.w, db.h, db.w
                )));
            }
        }
        if let Some((id, _)) = levels.iter().find(|(id, _)| !(3..=5).contains(id)) {
            return Err(Error::Pyramid(format!("level id {id} outside 3..=5")));
        }
        Ok(FeaturePyramid { modality, levels })
    }

    /// Random features shaped for `cfg`.
    pub fn random(cfg: &FusionConfig, modality: Modality, seed: Seed) -> Result<Self> {
        let levels = cfg
            .levels
            .iter()
            .map(|l| {
                let (h, w) = cfg.level_hw(l);
                let c = match modality {
                    Modality::Rgb => l.c_rgb,
                    _ => l.c_ir,
                };
                let s = seed.derive(&format!("{modality}.level{}", l.id));
                Ok((l.id, Tensor::seeded_uniform((cfg.batch, c, h, w), -1.0, 1.0, s)?))
            })
            .collect::<Result<Vec<_>>>()?;
        Self::new(modality, levels)
    }

    pub fn modality(&self) -> Modality {
        self.modality
    }

    pub fn levels(&self) -> &[(u8, Tensor<T>)] {
        &self.levels
    }

    pub fn level(&self, id: u8) -> Option<&Tensor<T>> {
        self.levels.iter().find(|(l, _)| *l == id).map(|(_, t)| t)
    }

    pub fn into_levels(self) -> Vec<(u8, Tensor<T>)> {
        self.levels
    }
}

/// Parameters for every level of a pyramid.
#[derive(Debug, Clone, PartialEq)]
pub struct FusionParams<T> {
    pub levels: BTreeMap<u8, FusionLevelParams<T>>,
}

impl<T: Scalar> FusionParams<T> {
    pub fn init(cfg: &FusionConfig, seed: Seed) -> Result<Self> {
        cfg.validate()?;
        let levels = cfg
            .levels
            .iter()
            .map(|l| Ok((l.id, FusionLevelParams::init(l, seed)?)))
            .collect::<Result<_>>()?;
        Ok(FusionParams { levels })
    }

    /// `(level, layer name, layer)` for every convolution.
    pub fn named_layers(&self) -> Vec<(u8, String, &crate::nn::ConvLayer<T>)> {
        self.levels
            .iter()
            .flat_map(|(&id, p)| p.layers().into_iter().map(move |(n, l)| (id, n, l)))
            .collect()
    }
}

/// Refines each RGB level, fuses it with the matching IR level and returns
/// the fused pyramid. Levels are processed in parallel.
pub fn pyramid_fuse<T: Scalar>(
    rgb: &FeaturePyramid<T>,
    ir: &FeaturePyramid<T>,
    params: &FusionParams<T>,
) -> Result<FeaturePyramid<T>> {
    if rgb.modality != Modality::Rgb || ir.modality != Modality::Ir {
        return Err(Error::Pyramid(format!(
            "expected rgb and ir pyramids, got {} and {}",
            rgb.modality, ir.modality
        )));
    }
    for (id, _) in &ir.levels {
        if rgb.level(*id).is_none() {
            return Err(Error::MissingLevel(*id));
        }
    }
    let jobs = rgb
        .levels
        .iter()
        .map(|(id, f_rgb)| {
            let f_ir = ir.level(*id).ok_or(Error::MissingLevel(*id))?;
            let p = params.levels.get(id).ok_or(Error::MissingLevel(*id))?;
            f_rgb.dims().check_nhw(&f_ir.dims())?;
            Ok((*id, f_rgb, f_ir, p))
        })
        .collect::<Result<Vec<_>>>()?;
    let fused = jobs
        .into_par_iter()
        .map(|(id, f_rgb, f_ir, p)| Ok((id, fusion_level_forward(f_rgb, f_ir, p)?)))
        .collect::<Result<Vec<_>>>()?;
    FeaturePyramid::new(Modality::Fused, fused)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fusion::config::LevelConfig;
    use crate::fusion::{fusion_block_forward, msfd_forward};

    fn small_cfg() -> FusionConfig {
        FusionConfig {
            input_h: 64,
            input_w: 96,
            batch: 1,
            levels: vec![
                LevelConfig::new(3, 4, 8),
                LevelConfig::new(4, 8, 8),
                LevelConfig::new(5, 8, 16),
            ],
        }
    }

    #[test]
    fn pyramid_invariants() {
        let t = |h, w| Tensor::<f32>::zeros((1, 2, h, w)).unwrap();
        assert!(FeaturePyramid::new(Modality::Rgb, vec![(3, t(8, 8)), (4, t(4, 4)), (5, t(2, 2))]).is_ok());
        assert!(FeaturePyramid::new(Modality::Rgb, vec![(3, t(8, 8)), (5, t(2, 2))]).is_ok());
        assert!(FeaturePyramid::new(Modality::Rgb, vec![(3, t(8, 8)), (4, t(3, 4))]).is_err());
        assert!(FeaturePyramid::new(Modality::Rgb, vec![(3, t(8, 8)), (3, t(8, 8))]).is_err());
        assert!(FeaturePyramid::new(Modality::Rgb, vec![(6, t(8, 8))]).is_err());
        assert!(FeaturePyramid::<f32>::new(Modality::Rgb, vec![]).is_err());
    }

    #[test]
    fn fuse_matches_per_level_composition() {
        let cfg = small_cfg();
        let p = FusionParams::<f32>::init(&cfg, Seed(1)).unwrap();
        let rgb = FeaturePyramid::random(&cfg, Modality::Rgb, Seed(2)).unwrap();
        let ir = FeaturePyramid::random(&cfg, Modality::Ir, Seed(3)).unwrap();
        let fused = pyramid_fuse(&rgb, &ir, &p).unwrap();
        assert_eq!(fused.modality(), Modality::Fused);
        for l in &cfg.levels {
            let lp = &p.levels[&l.id];
            let hat = msfd_forward(rgb.level(l.id).unwrap(), &lp.msfd).unwrap();
            let want = fusion_block_forward(&hat, ir.level(l.id).unwrap(), lp).unwrap();
            assert!(fused.level(l.id).unwrap().bitwise_eq(&want));
            assert_eq!(want.dims().c, l.c_ir);
        }
    }

    #[test]
    fn zero_parameters_degenerate_case() {
        // Zero distillation gives a zero RGB stream, so only the IR half survives
        // the identity-through tail.
        let cfg = small_cfg();
        let mut p = FusionParams::<f64>::init(&cfg, Seed(1)).unwrap();
        for l in &cfg.levels {
            let mut lp = FusionLevelParams::identity_through(l).unwrap();
            lp.msfd = p.levels[&l.id].msfd.clone();
            p.levels.insert(l.id, lp);
        }
        let rgb = FeaturePyramid::random(&cfg, Modality::Rgb, Seed(2)).unwrap();
        let ir = FeaturePyramid::random(&cfg, Modality::Ir, Seed(3)).unwrap();
        let fused = pyramid_fuse(&rgb, &ir, &p).unwrap();
        for l in &cfg.levels {
            let hat = msfd_forward(rgb.level(l.id).unwrap(), &p.levels[&l.id].msfd).unwrap();
            let want = crate::nn::gelu(&hat)
                .add(&crate::nn::gelu(ir.level(l.id).unwrap()))
                .unwrap();
            assert!(fused.level(l.id).unwrap().bitwise_eq(&want));
        }
    }

    #[test]
    fn missing_and_mismatched_levels() {
        let cfg = small_cfg();
        let p = FusionParams::<f32>::init(&cfg, Seed(1)).unwrap();
        let rgb = FeaturePyramid::random(&cfg, Modality::Rgb, Seed(2)).unwrap();
        let ir = FeaturePyramid::random(&cfg, Modality::Ir, Seed(3)).unwrap();
        let ir_short = FeaturePyramid::new(Modality::Ir, ir.levels()[..2].to_vec()).unwrap();
        assert!(matches!(pyramid_fuse(&rgb, &ir_short, &p), Err(Error::MissingLevel(5))));
        assert!(pyramid_fuse(&ir, &rgb, &p).is_err());

        let mut small = small_cfg();
        small.input_h = 32;
        let ir_small = FeaturePyramid::random(&small, Modality::Ir, Seed(3)).unwrap();
        let e = pyramid_fuse(&rgb, &ir_small, &p).unwrap_err();
        assert!(e.to_string().contains("spatial mismatch on h"), "{e}");
    }

    #[test]
    fn batch_equivariance() {
        let mut cfg = small_cfg();
        cfg.batch = 2;
        let p = FusionParams::<f32>::init(&cfg, Seed(4)).unwrap();
        let rgb = FeaturePyramid::random(&cfg, Modality::Rgb, Seed(5)).unwrap();
        let ir = FeaturePyramid::random(&cfg, Modality::Ir, Seed(6)).unwrap();
        let both = pyramid_fuse(&rgb, &ir, &p).unwrap();
        for n in 0..2 {
            let pick = |pyr: &FeaturePyramid<f32>| {
                let lv = pyr.levels().iter().map(|(id, t)| (*id, t.sample(n).unwrap())).collect();
                FeaturePyramid::new(pyr.modality(), lv).unwrap()
            };
            let one = pyramid_fuse(&pick(&rgb), &pick(&ir), &p).unwrap();
            for (id, t) in one.levels() {
                assert!(t.bitwise_eq(&both.level(*id).unwrap().sample(n).unwrap()));
            }
        }
    }
}
