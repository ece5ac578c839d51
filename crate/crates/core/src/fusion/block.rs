//! The per-level fusion block and its parameters.

use crate::error::{Axis, Error, Result};
use crate::nn::ConvLayer;
use crate::rng::Seed;
use crate::scalar::Scalar;
use crate::tensor::Tensor;

use super::config::LevelConfig;
use super::csp::{csp_backward, csp_forward, CspParams};
use super::gates::{ccsg_backward, ccsg_forward, clkg_backward, clkg_forward, CcsgParams, ClkgParams};
use super::msfd::{msfd_backward, msfd_forward, MsfdParams};
use super::Layers;

/// All learned weights of one pyramid level.
#[derive(Debug, Clone, PartialEq)]
pub struct FusionLevelParams<T> {
    pub c_rgb: usize,
    pub c_ir: usize,
    pub msfd: MsfdParams<T>,
    pub ccsg: CcsgParams<T>,
    pub clkg: ClkgParams<T>,
    pub csp_out: CspParams<T>,
}

/// Gradients of the three-stage block (the distillation stage is not part of it).
#[derive(Debug, Clone)]
pub struct BlockGrads<T> {
    pub ccsg: CcsgParams<T>,
    pub clkg: ClkgParams<T>,
    pub csp_out: CspParams<T>,
}

impl<T: Scalar> FusionLevelParams<T> {
    /// Independent uniform initialisation; layer `name` of level `l` draws from
    /// `seed.derive("level{l}").derive(name)` for each name component.
    pub fn init(cfg: &LevelConfig, seed: Seed) -> Result<Self> {
        cfg.validate()?;
        let s = seed.derive(&format!("level{}", cfg.id));
        let c = cfg.fused_width();
        Ok(FusionLevelParams {
            c_rgb: cfg.c_rgb,
            c_ir: cfg.c_ir,
            msfd: MsfdParams::init(cfg.msfd_shape(), s.derive("msfd"))?,
            ccsg: CcsgParams::init(c, cfg.groups.ccsg_shuffle, cfg.groups.ccsg_groups, s.derive("ccsg"))?,
            clkg: ClkgParams::init(c, s.derive("clkg"))?,
            csp_out: CspParams::init(cfg.tail_shape(), s.derive("csp_out"))?,
        })
    }

    pub fn zeros(cfg: &LevelConfig) -> Result<Self> {
        cfg.validate()?;
        let c = cfg.fused_width();
        Ok(FusionLevelParams {
            c_rgb: cfg.c_rgb,
            c_ir: cfg.c_ir,
            msfd: MsfdParams::zeros(cfg.msfd_shape())?,
            ccsg: CcsgParams::zeros(c, cfg.groups.ccsg_shuffle, cfg.groups.ccsg_groups)?,
            clkg: ClkgParams::zeros(c)?,
            csp_out: CspParams::zeros(cfg.tail_shape())?,
        })
    }

    /// Zero gates and a square identity tail projection (no shuffle).
    pub fn identity_through(cfg: &LevelConfig) -> Result<Self> {
        let mut p = Self::zeros(cfg)?;
        p.csp_out = CspParams::identity(cfg.fused_width(), cfg.groups.tail_groups)?;
        Ok(p)
    }

    /// Checks the cross-stage width invariants.
    pub fn validate(&self) -> Result<()> {
        let c = 2 * self.c_ir;
        let checks = [
            ("distillation input", self.msfd.c_in(), self.c_rgb),
            ("distillation output", self.msfd.c_out(), self.c_ir),
            ("shuffle gate", self.ccsg.channels(), c),
            ("large-kernel gate", self.clkg.channels(), c),
            ("projection input", self.csp_out.shape.c_in, c),
            ("projection output", self.csp_out.shape.c_out, c),
        ];
        for (what, got, want) in checks {
            if got != want {
                return Err(Error::InvalidConfig(format!("{what} width {got}, expected {want}")));
            }
        }
        Ok(())
    }
}

impl<T: Scalar> Layers<T> for FusionLevelParams<T> {
    fn layers(&self) -> Vec<(String, &ConvLayer<T>)> {
        let mut v = Vec::new();
        for (p, xs) in [
            ("msfd", self.msfd.layers()),
            ("ccsg", self.ccsg.layers()),
            ("clkg", self.clkg.layers()),
            ("csp_out", self.csp_out.layers()),
        ] {
            v.extend(xs.into_iter().map(|(n, l)| (format!("{p}.{n}"), l)));
        }
        v
    }

    fn layers_mut(&mut self) -> Vec<(String, &mut ConvLayer<T>)> {
        let mut v = Vec::new();
        for (p, xs) in [
            ("msfd", self.msfd.layers_mut()),
            ("ccsg", self.ccsg.layers_mut()),
            ("clkg", self.clkg.layers_mut()),
            ("csp_out", self.csp_out.layers_mut()),
        ] {
            v.extend(xs.into_iter().map(|(n, l)| (format!("{p}.{n}"), l)));
        }
        v
    }
}

fn check_pair<T: Scalar>(rgb: &Tensor<T>, ir: &Tensor<T>, c_ir: usize) -> Result<()> {
    rgb.dims().check_nhw(&ir.dims())?;
    for c in [rgb.dims().c, ir.dims().c] {
        if c != c_ir {
            return Err(Error::ShapeMismatch {
                axis: Axis::C,
                left: c,
                right: c_ir,
            });
        }
    }
    Ok(())
}

/// Concat (RGB first), shuffle gate, large-kernel gate, projection, then the
/// two channel halves are added.
pub fn fusion_block_forward<T: Scalar>(
    f_rgb_hat: &Tensor<T>,
    f_ir: &Tensor<T>,
    p: &FusionLevelParams<T>,
) -> Result<Tensor<T>> {
    check_pair(f_rgb_hat, f_ir, p.c_ir)?;
    let x = f_rgb_hat.concat_channels(f_ir)?;
    let x = ccsg_forward(&x, &p.ccsg)?;
    let x = clkg_forward(&x, &p.clkg)?;
    let x = csp_forward(&x, &p.csp_out)?;
    let halves = x.split_channels(2)?;
    halves[0].add(&halves[1])
}

/// Gradients with respect to both inputs and the block parameters.
pub fn fusion_block_backward<T: Scalar>(
    f_rgb_hat: &Tensor<T>,
    f_ir: &Tensor<T>,
    p: &FusionLevelParams<T>,
    grad_out: &Tensor<T>,
) -> Result<(Tensor<T>, Tensor<T>, BlockGrads<T>)> {
    check_pair(f_rgb_hat, f_ir, p.c_ir)?;
    let x = f_rgb_hat.concat_channels(f_ir)?;
    let a = ccsg_forward(&x, &p.ccsg)?;
    let b = clkg_forward(&a, &p.clkg)?;
    // both halves receive the full upstream gradient
    let g_proj = grad_out.concat_channels(grad_out)?;
    let (gb, g_csp) = csp_backward(&b, &p.csp_out, &g_proj)?;
    let (ga, g_clkg) = clkg_backward(&a, &p.clkg, &gb)?;
    let (gx, g_ccsg) = ccsg_backward(&x, &p.ccsg, &ga)?;
    let mut halves = gx.split_channels(2)?;
    let g_ir = halves.pop().expect("two halves");
    let g_rgb = halves.pop().expect("two halves");
    Ok((
        g_rgb,
        g_ir,
        BlockGrads {
            ccsg: g_ccsg,
            clkg: g_clkg,
            csp_out: g_csp,
        },
    ))
}

/// Distillation of the RGB features followed by the fusion block.
pub fn fusion_level_forward<T: Scalar>(
    f_rgb: &Tensor<T>,
    f_ir: &Tensor<T>,
    p: &FusionLevelParams<T>,
) -> Result<Tensor<T>> {
    f_rgb.dims().check_nhw(&f_ir.dims())?;
    let hat = msfd_forward(f_rgb, &p.msfd)?;
    fusion_block_forward(&hat, f_ir, p)
}

pub fn fusion_level_backward<T: Scalar>(
    f_rgb: &Tensor<T>,
    f_ir: &Tensor<T>,
    p: &FusionLevelParams<T>,
    grad_out: &Tensor<T>,
) -> Result<(Tensor<T>, Tensor<T>, FusionLevelParams<T>)> {
    f_rgb.dims().check_nhw(&f_ir.dims())?;
    let hat = msfd_forward(f_rgb, &p.msfd)?;
    let (g_hat, g_ir, block) = fusion_block_backward(&hat, f_ir, p, grad_out)?;
    let (g_rgb, g_msfd) = msfd_backward(f_rgb, &p.msfd, &g_hat)?;
    Ok((
        g_rgb,
        g_ir,
        FusionLevelParams {
            c_rgb: p.c_rgb,
            c_ir: p.c_ir,
            msfd: g_msfd,
            ccsg: block.ccsg,
            clkg: block.clkg,
            csp_out: block.csp_out,
        },
    ))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::nn::finite_diff_grad;
    use crate::nn::gelu;
    use crate::nn::gradcheck::{max_relative_error, sample_coords};
    use crate::tensor::Dims;

    #[test]
    fn shapes() {
        let cfg = LevelConfig::new(3, 16, 16);
        let p = FusionLevelParams::<f32>::init(&cfg, Seed(1)).unwrap();
        let a = Tensor::<f32>::seeded_uniform((1, 16, 20, 20), -1.0, 1.0, Seed(2)).unwrap();
        let b = Tensor::<f32>::seeded_uniform((1, 16, 20, 20), -1.0, 1.0, Seed(3)).unwrap();
        assert_eq!(
            fusion_block_forward(&a, &b, &p).unwrap().dims(),
            Dims::new(1, 16, 20, 20)
        );
        assert_eq!(
            fusion_level_forward(&a, &b, &p).unwrap().dims(),
            Dims::new(1, 16, 20, 20)
        );
    }

    #[test]
    fn identity_through_projects_each_modality_through_gelu() {
        let cfg = LevelConfig::new(3, 8, 8);
        let p = FusionLevelParams::<f32>::identity_through(&cfg).unwrap();
        let a = Tensor::<f32>::seeded_uniform((1, 8, 6, 6), -2.0, 2.0, Seed(4)).unwrap();
        let b = Tensor::<f32>::seeded_uniform((1, 8, 6, 6), -2.0, 2.0, Seed(5)).unwrap();
        let y = fusion_block_forward(&a, &b, &p).unwrap();
        let want = gelu(&a).add(&gelu(&b)).unwrap();
        assert!(y.bitwise_eq(&want));
    }

    #[test]
    fn mismatched_inputs() {
        let cfg = LevelConfig::new(3, 8, 8);
        let p = FusionLevelParams::<f32>::zeros(&cfg).unwrap();
        let a = Tensor::<f32>::zeros((1, 8, 6, 6)).unwrap();
        let e = fusion_block_forward(&a, &Tensor::zeros((1, 8, 6, 7)).unwrap(), &p).unwrap_err();
        assert!(e.to_string().contains("spatial mismatch on w"));
        let e = fusion_block_forward(&a, &Tensor::zeros((1, 4, 6, 6)).unwrap(), &p).unwrap_err();
        assert!(e.to_string().contains("channel mismatch"));
    }

    #[test]
    fn init_is_deterministic_and_valid() {
        let cfg = LevelConfig::new(4, 8, 16);
        let p = FusionLevelParams::<f32>::init(&cfg, Seed(9)).unwrap();
        p.validate().unwrap();
        assert_eq!(p, FusionLevelParams::<f32>::init(&cfg, Seed(9)).unwrap());
        assert_ne!(p, FusionLevelParams::<f32>::init(&cfg, Seed(10)).unwrap());
        // fan-in bound on the large-kernel depthwise layers: 1/sqrt(25)
        assert!(p.clkg.dw_a.weights.weight.data().iter().all(|v| v.abs() < 0.2));
    }

    fn level_grad_check(dims: Dims, seed: u64) {
        let s = Seed(seed);
        let cfg = LevelConfig::new(3, dims.c, dims.c);
        let p = FusionLevelParams::<f64>::init(&cfg, s).unwrap();
        let rgb = Tensor::<f64>::seeded_uniform(dims, -1.0, 1.0, s.derive("rgb")).unwrap();
        let ir = Tensor::<f64>::seeded_uniform(dims, -1.0, 1.0, s.derive("ir")).unwrap();
        let r = Tensor::<f64>::seeded_uniform(dims, -1.0, 1.0, s.derive("r")).unwrap();
        let (g_rgb, g_ir, grads) = fusion_level_backward(&rgb, &ir, &p, &r).unwrap();
        let coords = sample_coords(rgb.len(), 50, s.derive("c"));

        let f_rgb = |t: &Tensor<f64>| fusion_level_forward(t, &ir, &p).unwrap().dot_f64(&r).unwrap();
        let num = finite_diff_grad(f_rgb, &rgb, &coords, 1e-3).unwrap();
        let ana: Vec<f64> = coords.iter().map(|&i| g_rgb.data()[i]).collect();
        assert!(max_relative_error(&ana, &num) <= 1e-5);

        let f_ir = |t: &Tensor<f64>| fusion_level_forward(&rgb, t, &p).unwrap().dot_f64(&r).unwrap();
        let num = finite_diff_grad(f_ir, &ir, &coords, 1e-3).unwrap();
        let ana: Vec<f64> = coords.iter().map(|&i| g_ir.data()[i]).collect();
        assert!(max_relative_error(&ana, &num) <= 1e-5);

        crate::fusion::testing::check_param_grads(
            &p,
            &grads,
            |q| fusion_level_forward(&rgb, &ir, q).unwrap().dot_f64(&r).unwrap(),
            s.derive("p"),
        );
    }

    #[test]
    fn full_level_gradients() {
        level_grad_check(Dims::new(1, 8, 6, 6), 11);
        level_grad_check(Dims::new(2, 4, 5, 4), 12);
    }
}
