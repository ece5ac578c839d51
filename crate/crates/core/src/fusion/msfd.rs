//! Multi-scale feature distillation for the RGB stream.
//!
//! Three depthwise branches (3x3, 5x5, 5x5 with dilation 2) run at full
//! resolution, are concatenated after the input as `[x, b3, b5, b5d]`, and
//! the `4C` result is projected to the output width by a [`CspParams`].

use crate::error::{Axis, Error, Result};
use crate::nn::{ConvLayer, ConvSpec};
use crate::rng::Seed;
use crate::scalar::Scalar;
use crate::tensor::{concat_channels, Tensor};

use super::csp::{csp_backward, csp_forward, CspParams, CspShape};
use super::Layers;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct MsfdShape {
    /// Input (RGB) width.
    pub c_in: usize,
    pub c_out: usize,
    pub shuffle_groups: usize,
    pub groups: usize,
}

impl MsfdShape {
    pub fn branch_specs(&self) -> [ConvSpec; 3] {
        [
            ConvSpec::depthwise(self.c_in, 3, 1),
            ConvSpec::depthwise(self.c_in, 5, 1),
            ConvSpec::depthwise(self.c_in, 5, 2),
        ]
    }

    /// Projection from the `4 * c_in` concat; the hidden width equals its input.
    pub fn csp_shape(&self) -> CspShape {
        CspShape {
            c_in: 4 * self.c_in,
            c_mid: 4 * self.c_in,
            c_out: self.c_out,
            shuffle_groups: self.shuffle_groups,
            groups_g1: self.groups,
            groups_g2: self.groups,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct MsfdParams<T> {
    pub dw3: ConvLayer<T>,
    pub dw5: ConvLayer<T>,
    pub dw5d: ConvLayer<T>,
    pub csp: CspParams<T>,
}

impl<T: Scalar> MsfdParams<T> {
    pub fn init(shape: MsfdShape, seed: Seed) -> Result<Self> {
        let [s3, s5, s5d] = shape.branch_specs();
        Ok(MsfdParams {
            dw3: ConvLayer::init(s3, seed.derive("dw3"))?,
            dw5: ConvLayer::init(s5, seed.derive("dw5"))?,
            dw5d: ConvLayer::init(s5d, seed.derive("dw5d"))?,
            csp: CspParams::init(shape.csp_shape(), seed.derive("csp"))?,
        })
    }

    pub fn zeros(shape: MsfdShape) -> Result<Self> {
        let [s3, s5, s5d] = shape.branch_specs();
        Ok(MsfdParams {
            dw3: ConvLayer::zeros(s3)?,
            dw5: ConvLayer::zeros(s5)?,
            dw5d: ConvLayer::zeros(s5d)?,
            csp: CspParams::zeros(shape.csp_shape())?,
        })
    }

    pub fn c_in(&self) -> usize {
        self.dw3.spec.c_in
    }

    pub fn c_out(&self) -> usize {
        self.csp.shape.c_out
    }
}

impl<T: Scalar> Layers<T> for MsfdParams<T> {
    fn layers(&self) -> Vec<(String, &ConvLayer<T>)> {
        let mut v = vec![
            ("dw3".to_string(), &self.dw3),
            ("dw5".to_string(), &self.dw5),
            ("dw5d".to_string(), &self.dw5d),
        ];
        v.extend(self.csp.layers().into_iter().map(|(n, l)| (format!("csp.{n}"), l)));
        v
    }

    fn layers_mut(&mut self) -> Vec<(String, &mut ConvLayer<T>)> {
        let mut v = vec![
            ("dw3".to_string(), &mut self.dw3),
            ("dw5".to_string(), &mut self.dw5),
            ("dw5d".to_string(), &mut self.dw5d),
        ];
        v.extend(self.csp.layers_mut().into_iter().map(|(n, l)| (format!("csp.{n}"), l)));
        v
    }
}

fn check_input<T: Scalar>(f_rgb: &Tensor<T>, p: &MsfdParams<T>) -> Result<()> {
    let c = f_rgb.dims().c;
    if c != p.c_in() {
        return Err(Error::ShapeMismatch {
            axis: Axis::C,
            left: c,
            right: p.c_in(),
        });
    }
    Ok(())
}

fn concat_branches<T: Scalar>(x: &Tensor<T>, p: &MsfdParams<T>) -> Result<Tensor<T>> {
    let b3 = p.dw3.forward(x)?;
    let b5 = p.dw5.forward(x)?;
    let b5d = p.dw5d.forward(x)?;
    concat_channels(&[x, &b3, &b5, &b5d])
}

pub fn msfd_forward<T: Scalar>(f_rgb: &Tensor<T>, p: &MsfdParams<T>) -> Result<Tensor<T>> {
    check_input(f_rgb, p)?;
    csp_forward(&concat_branches(f_rgb, p)?, &p.csp)
}

pub fn msfd_backward<T: Scalar>(
    f_rgb: &Tensor<T>,
    p: &MsfdParams<T>,
    grad_out: &Tensor<T>,
) -> Result<(Tensor<T>, MsfdParams<T>)> {
    check_input(f_rgb, p)?;
    let cat = concat_branches(f_rgb, p)?;
    let (gcat, gcsp) = csp_backward(&cat, &p.csp, grad_out)?;
    let parts = gcat.split_channels(4)?;
    let g3 = p.dw3.backward(f_rgb, &parts[1])?;
    let g5 = p.dw5.backward(f_rgb, &parts[2])?;
    let g5d = p.dw5d.backward(f_rgb, &parts[3])?;
    let gx = parts[0].add(&g3.input)?.add(&g5.input)?.add(&g5d.input)?;
    let grads = MsfdParams {
        dw3: ConvLayer {
            spec: p.dw3.spec,
            weights: g3.weights,
        },
        dw5: ConvLayer {
            spec: p.dw5.spec,
            weights: g5.weights,
        },
        dw5d: ConvLayer {
            spec: p.dw5d.spec,
            weights: g5d.weights,
        },
        csp: gcsp,
    };
    Ok((gx, grads))
}
