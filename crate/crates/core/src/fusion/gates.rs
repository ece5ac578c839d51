//! The two residual gates of the fusion block.
//!
//! Shuffle gate: `x + GELU(G(shuffle(x))) ⊙ shuffle(x)`.
//! Large-kernel gate: `x + GELU(K(x)) ⊙ x`, with `K` a 5x5 depthwise followed
//! by a 5x5 depthwise at dilation 2 (13x13 combined support).
//!
//! Both reduce to the identity when the gate path is zero, because
//! `GELU(0) = 0`.

use crate::error::{Axis, Error, Result};
use crate::nn::{channel_shuffle, channel_shuffle_backward, gelu, gelu_backward, ConvLayer, ConvSpec};
use crate::rng::Seed;
use crate::scalar::Scalar;
use crate::tensor::Tensor;

use super::Layers;

#[derive(Debug, Clone, PartialEq)]
pub struct CcsgParams<T> {
    pub shuffle_groups: usize,
    /// Grouped 1x1, `c -> c`.
    pub g: ConvLayer<T>,
}

impl<T: Scalar> CcsgParams<T> {
    pub fn spec(c: usize, groups: usize) -> ConvSpec {
        ConvSpec::pointwise(c, c, groups)
    }

    pub fn init(c: usize, shuffle_groups: usize, groups: usize, seed: Seed) -> Result<Self> {
        check_shuffle(c, shuffle_groups)?;
        Ok(CcsgParams {
            shuffle_groups,
            g: ConvLayer::init(Self::spec(c, groups), seed.derive("g"))?,
        })
    }

    pub fn zeros(c: usize, shuffle_groups: usize, groups: usize) -> Result<Self> {
        check_shuffle(c, shuffle_groups)?;
        Ok(CcsgParams {
            shuffle_groups,
            g: ConvLayer::zeros(Self::spec(c, groups))?,
        })
    }

    pub fn channels(&self) -> usize {
        self.g.spec.c_in
    }
}

fn check_shuffle(c: usize, g: usize) -> Result<()> {
    if g == 0 || !c.is_multiple_of(g) {
        return Err(Error::NotDivisible {
            what: "gate width",
            value: c,
            divisor: g,
        });
    }
    Ok(())
}

fn check_channels(got: usize, want: usize) -> Result<()> {
    if got != want {
        return Err(Error::ShapeMismatch {
            axis: Axis::C,
            left: got,
            right: want,
        });
    }
    Ok(())
}

impl<T: Scalar> Layers<T> for CcsgParams<T> {
    fn layers(&self) -> Vec<(String, &ConvLayer<T>)> {
        vec![("g".into(), &self.g)]
    }

    fn layers_mut(&mut self) -> Vec<(String, &mut ConvLayer<T>)> {
        vec![("g".into(), &mut self.g)]
    }
}

pub fn ccsg_forward<T: Scalar>(f_in: &Tensor<T>, p: &CcsgParams<T>) -> Result<Tensor<T>> {
    check_channels(f_in.dims().c, p.channels())?;
    let shuffled = channel_shuffle(f_in, p.shuffle_groups)?;
    let pre = p.g.forward(&shuffled)?;
    let gate = gelu(&pre).mul(&shuffled)?;
    f_in.add(&gate)
}

pub fn ccsg_backward<T: Scalar>(
    f_in: &Tensor<T>,
    p: &CcsgParams<T>,
    grad_out: &Tensor<T>,
) -> Result<(Tensor<T>, CcsgParams<T>)> {
    check_channels(f_in.dims().c, p.channels())?;
    let shuffled = channel_shuffle(f_in, p.shuffle_groups)?;
    let pre = p.g.forward(&shuffled)?;
    // gate = GELU(pre) ⊙ shuffled
    let mut g_shuffled = grad_out.mul(&gelu(&pre))?;
    let g_pre = gelu_backward(&pre, &grad_out.mul(&shuffled)?)?;
    let conv = p.g.backward(&shuffled, &g_pre)?;
    g_shuffled.add_assign(&conv.input)?;
    let gx = grad_out.add(&channel_shuffle_backward(&g_shuffled, p.shuffle_groups)?)?;
    Ok((
        gx,
        CcsgParams {
            shuffle_groups: p.shuffle_groups,
            g: ConvLayer {
                spec: p.g.spec,
                weights: conv.weights,
            },
        },
    ))
}

#[derive(Debug, Clone, PartialEq)]
pub struct ClkgParams<T> {
    /// Depthwise 5x5.
    pub dw_a: ConvLayer<T>,
    /// Depthwise 5x5, dilation 2.
    pub dw_b: ConvLayer<T>,
}

impl<T: Scalar> ClkgParams<T> {
    pub fn specs(c: usize) -> (ConvSpec, ConvSpec) {
        (ConvSpec::depthwise(c, 5, 1), ConvSpec::depthwise(c, 5, 2))
    }

    pub fn init(c: usize, seed: Seed) -> Result<Self> {
        let (a, b) = Self::specs(c);
        Ok(ClkgParams {
            dw_a: ConvLayer::init(a, seed.derive("dw_a"))?,
            dw_b: ConvLayer::init(b, seed.derive("dw_b"))?,
        })
    }

    pub fn zeros(c: usize) -> Result<Self> {
        let (a, b) = Self::specs(c);
        Ok(ClkgParams {
            dw_a: ConvLayer::zeros(a)?,
            dw_b: ConvLayer::zeros(b)?,
        })
    }

    pub fn channels(&self) -> usize {
        self.dw_a.spec.c_in
    }
}

impl<T: Scalar> Layers<T> for ClkgParams<T> {
    fn layers(&self) -> Vec<(String, &ConvLayer<T>)> {
        vec![("dw_a".into(), &self.dw_a), ("dw_b".into(), &self.dw_b)]
    }

    fn layers_mut(&mut self) -> Vec<(String, &mut ConvLayer<T>)> {
        vec![("dw_a".into(), &mut self.dw_a), ("dw_b".into(), &mut self.dw_b)]
    }
}

/// The large-kernel context `K(x)` before gating.
pub fn clkg_context<T: Scalar>(f_in: &Tensor<T>, p: &ClkgParams<T>) -> Result<Tensor<T>> {
    check_channels(f_in.dims().c, p.channels())?;
    p.dw_b.forward(&p.dw_a.forward(f_in)?)
}

pub fn clkg_forward<T: Scalar>(f_in: &Tensor<T>, p: &ClkgParams<T>) -> Result<Tensor<T>> {
    let ctx = clkg_context(f_in, p)?;
    f_in.add(&gelu(&ctx).mul(f_in)?)
}

pub fn clkg_backward<T: Scalar>(
    f_in: &Tensor<T>,
    p: &ClkgParams<T>,
    grad_out: &Tensor<T>,
) -> Result<(Tensor<T>, ClkgParams<T>)> {
    check_channels(f_in.dims().c, p.channels())?;
    let a = p.dw_a.forward(f_in)?;
    let ctx = p.dw_b.forward(&a)?;
    let mut gx = grad_out.add(&grad_out.mul(&gelu(&ctx))?)?;
    let g_ctx = gelu_backward(&ctx, &grad_out.mul(f_in)?)?;
    let gb = p.dw_b.backward(&a, &g_ctx)?;
    let ga = p.dw_a.backward(f_in, &gb.input)?;
    gx.add_assign(&ga.input)?;
    Ok((
        gx,
        ClkgParams {
            dw_a: ConvLayer {
                spec: p.dw_a.spec,
                weights: ga.weights,
            },
            dw_b: ConvLayer {
                spec: p.dw_b.spec,
                weights: gb.weights,
            },
        },
    ))
}
