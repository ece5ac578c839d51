//! Channel shuffle projection: shuffle, grouped 1x1, GELU, grouped 1x1.

use crate::error::{Error, Result};
use crate::nn::{channel_shuffle, channel_shuffle_backward, gelu, gelu_backward, ConvLayer, ConvSpec, ConvWeights};
use crate::rng::Seed;
use crate::scalar::Scalar;
use crate::tensor::Tensor;

use super::Layers;

/// Channel widths and group counts of a projection.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct CspShape {
    pub c_in: usize,
    pub c_mid: usize,
    pub c_out: usize,
    pub shuffle_groups: usize,
    pub groups_g1: usize,
    pub groups_g2: usize,
}

impl CspShape {
    pub fn validate(&self) -> Result<()> {
        if self.shuffle_groups == 0 || !self.c_in.is_multiple_of(self.shuffle_groups) {
            return Err(Error::NotDivisible {
                what: "projection input width",
                value: self.c_in,
                divisor: self.shuffle_groups,
            });
        }
        let (a, b) = self.specs();
        a.validate()?;
        b.validate()
    }

    /// Specs of the two grouped 1x1 convolutions.
    pub fn specs(&self) -> (ConvSpec, ConvSpec) {
        (
            ConvSpec::pointwise(self.c_in, self.c_mid, self.groups_g1),
            ConvSpec::pointwise(self.c_mid, self.c_out, self.groups_g2),
        )
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CspParams<T> {
    pub shape: CspShape,
    pub g1: ConvLayer<T>,
    pub g2: ConvLayer<T>,
}

impl<T: Scalar> CspParams<T> {
    pub fn new(shape: CspShape, g1: ConvWeights<T>, g2: ConvWeights<T>) -> Result<Self> {
        shape.validate()?;
        let (s1, s2) = shape.specs();
        Ok(CspParams {
            shape,
            g1: ConvLayer::new(s1, g1)?,
            g2: ConvLayer::new(s2, g2)?,
        })
    }

    pub fn init(shape: CspShape, seed: Seed) -> Result<Self> {
        shape.validate()?;
        let (s1, s2) = shape.specs();
        Ok(CspParams {
            shape,
            g1: ConvLayer::init(s1, seed.derive("g1"))?,
            g2: ConvLayer::init(s2, seed.derive("g2"))?,
        })
    }

    pub fn zeros(shape: CspShape) -> Result<Self> {
        shape.validate()?;
        let (s1, s2) = shape.specs();
        Ok(CspParams {
            shape,
            g1: ConvLayer::zeros(s1)?,
            g2: ConvLayer::zeros(s2)?,
        })
    }

    /// Square projection with per-group identity kernels, zero biases and no
    /// shuffle. Its output is `GELU(input)`.
    pub fn identity(c: usize, groups: usize) -> Result<Self> {
        let shape = CspShape {
            c_in: c,
            c_mid: c,
            c_out: c,
            shuffle_groups: 1,
            groups_g1: groups,
            groups_g2: groups,
        };
        let (s1, s2) = shape.specs();
        Self::new(shape, ConvWeights::identity(&s1)?, ConvWeights::identity(&s2)?)
    }
}

impl<T: Scalar> Layers<T> for CspParams<T> {
    fn layers(&self) -> Vec<(String, &ConvLayer<T>)> {
        vec![("g1".into(), &self.g1), ("g2".into(), &self.g2)]
    }

    fn layers_mut(&mut self) -> Vec<(String, &mut ConvLayer<T>)> {
        vec![("g1".into(), &mut self.g1), ("g2".into(), &mut self.g2)]
    }
}

fn check_input<T: Scalar>(t: &Tensor<T>, p: &CspParams<T>) -> Result<()> {
    if t.dims().c != p.shape.c_in {
        return Err(Error::ShapeMismatch {
            axis: crate::error::Axis::C,
            left: t.dims().c,
            right: p.shape.c_in,
        });
    }
    Ok(())
}

/// `G2(GELU(G1(shuffle(t))))`.
pub fn csp_forward<T: Scalar>(t: &Tensor<T>, p: &CspParams<T>) -> Result<Tensor<T>> {
    check_input(t, p)?;
    let s = channel_shuffle(t, p.shape.shuffle_groups)?;
    let u = p.g1.forward(&s)?;
    p.g2.forward(&gelu(&u))
}

/// Gradient with respect to the input and every parameter.
pub fn csp_backward<T: Scalar>(
    t: &Tensor<T>,
    p: &CspParams<T>,
    grad_out: &Tensor<T>,
) -> Result<(Tensor<T>, CspParams<T>)> {
    check_input(t, p)?;
    let s = channel_shuffle(t, p.shape.shuffle_groups)?;
    let u = p.g1.forward(&s)?;
    let v = gelu(&u);
    let g2 = p.g2.backward(&v, grad_out)?;
    let gu = gelu_backward(&u, &g2.input)?;
    let g1 = p.g1.backward(&s, &gu)?;
    let gx = channel_shuffle_backward(&g1.input, p.shape.shuffle_groups)?;
    let grads = CspParams {
        shape: p.shape,
        g1: ConvLayer {
            spec: p.g1.spec,
            weights: g1.weights,
        },
        g2: ConvLayer {
            spec: p.g2.spec,
            weights: g2.weights,
        },
    };
    Ok((gx, grads))
}
