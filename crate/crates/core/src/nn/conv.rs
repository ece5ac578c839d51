//! Stride-1 grouped/dilated 2-D cross-correlation with zero padding.
//!
//! [`conv2d_reference`] is the direct seven-loop kernel and the correctness
//! anchor; [`conv2d`] reorders the loops so the innermost one runs over
//! contiguous output pixels and splits work across output planes. Each output
//! element is still accumulated in `f64` over `(ci, ky, kx)` in the same order,
//! so both produce identical bits regardless of thread count.

use rayon::prelude::*;

use crate::error::{Axis, Error, Result};
use crate::rng::Seed;
use crate::scalar::Scalar;
use crate::tensor::{Dims, Tensor};

/// Shape of a convolution layer. Stride is always 1.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct ConvSpec {
    pub c_in: usize,
    pub c_out: usize,
    pub k: usize,
    pub groups: usize,
    pub dilation: usize,
    pub padding: usize,
    pub bias: bool,
}

impl ConvSpec {
    /// Dense `k x k` convolution with "same" padding and a bias.
    pub fn new(c_in: usize, c_out: usize, k: usize) -> Self {
        ConvSpec {
            c_in,
            c_out,
            k,
            groups: 1,
            dilation: 1,
            padding: k.saturating_sub(1) / 2,
            bias: true,
        }
    }

    /// Grouped 1x1 convolution with a bias.
    pub fn pointwise(c_in: usize, c_out: usize, groups: usize) -> Self {
        ConvSpec::new(c_in, c_out, 1).groups(groups)
    }

    /// Depthwise `k x k` convolution with "same" padding and a bias.
    pub fn depthwise(c: usize, k: usize, dilation: usize) -> Self {
        ConvSpec::new(c, c, k).groups(c).dilation(dilation)
    }

    pub fn groups(mut self, groups: usize) -> Self {
        self.groups = groups;
        self
    }

    /// Sets the dilation and recomputes "same" padding.
    pub fn dilation(mut self, dilation: usize) -> Self {
        self.dilation = dilation;
        self.padding = dilation * self.k.saturating_sub(1) / 2;
        self
    }

    pub fn padding(mut self, padding: usize) -> Self {
        self.padding = padding;
        self
    }

    pub fn bias(mut self, bias: bool) -> Self {
        self.bias = bias;
        self
    }

    pub fn c_in_per_group(&self) -> usize {
        self.c_in / self.groups
    }

    pub fn c_out_per_group(&self) -> usize {
        self.c_out / self.groups
    }

    pub fn is_depthwise(&self) -> bool {
        self.groups == self.c_in && self.c_in == self.c_out
    }

    /// True when the padding preserves spatial size.
    pub fn is_same(&self) -> bool {
        self.k % 2 == 1 && 2 * self.padding == self.dilation * (self.k - 1)
    }

    /// Receptive-field extent of one tap window, `d*(k-1)+1`.
    pub fn extent(&self) -> usize {
        self.dilation * (self.k - 1) + 1
    }

    pub fn weight_dims(&self) -> Dims {
        Dims::new(self.c_out, self.c_in_per_group(), self.k, self.k)
    }

    /// `(c_in / groups) * k^2`.
    pub fn fan_in(&self) -> usize {
        self.c_in_per_group() * self.k * self.k
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::InvalidSpec(m));
        if self.c_in == 0 || self.c_out == 0 {
            return bad(format!(
                "channel counts must be positive ({} -> {})",
                self.c_in, self.c_out
            ));
        }
        if self.k == 0 || self.groups == 0 || self.dilation == 0 {
            return bad(format!(
                "kernel ({}), groups ({}) and dilation ({}) must be positive",
                self.k, self.groups, self.dilation
            ));
        }
        if !self.c_in.is_multiple_of(self.groups) {
            return bad(format!("c_in {} not divisible by groups {}", self.c_in, self.groups));
        }
        if !self.c_out.is_multiple_of(self.groups) {
            return bad(format!("c_out {} not divisible by groups {}", self.c_out, self.groups));
        }
        Ok(())
    }

    /// Output extent along one axis.
    pub fn output_len(&self, input: usize) -> Result<usize> {
        let span = self.extent();
        let padded = input + 2 * self.padding;
        if padded < span {
            return Err(Error::NonPositiveOutput {
                input,
                kernel: self.k,
                dilation: self.dilation,
                padding: self.padding,
            });
        }
        Ok(padded - span + 1)
    }

    pub fn output_dims(&self, input: Dims) -> Result<Dims> {
        self.validate()?;
        if input.c != self.c_in {
            return Err(Error::ShapeMismatch {
                axis: Axis::C,
                left: input.c,
                right: self.c_in,
            });
        }
        Ok(Dims::new(
            input.n,
            self.c_out,
            self.output_len(input.h)?,
            self.output_len(input.w)?,
        ))
    }
}

/// Kernel and optional bias of one convolution layer.
#[derive(Debug, Clone, PartialEq)]
pub struct ConvWeights<T> {
    /// `(c_out, c_in/groups, k, k)`.
    pub weight: Tensor<T>,
    pub bias: Option<Vec<T>>,
}

impl<T: Scalar> ConvWeights<T> {
    pub fn zeros(spec: &ConvSpec) -> Result<Self> {
        spec.validate()?;
        Ok(ConvWeights {
            weight: Tensor::zeros(spec.weight_dims())?,
            bias: spec.bias.then(|| vec![T::zero(); spec.c_out]),
        })
    }

    /// Uniform in `±sqrt(1/fan_in)` for both weight and bias.
    ///
    /// The bias stream is `seed.derive("bias")`.
    pub fn init(spec: &ConvSpec, seed: Seed) -> Result<Self> {
        spec.validate()?;
        let bound = (1.0 / spec.fan_in() as f64).sqrt();
        let weight = Tensor::seeded_uniform(spec.weight_dims(), -bound, bound, seed)?;
        let bias = if spec.bias {
            let b = Tensor::<T>::seeded_uniform((1, spec.c_out, 1, 1), -bound, bound, seed.derive("bias"))?;
            Some(b.into_data())
        } else {
            None
        };
        Ok(ConvWeights { weight, bias })
    }

    /// Per-group identity for square specs with `k = 1`.
    pub fn identity(spec: &ConvSpec) -> Result<Self> {
        if spec.k != 1 || spec.c_in != spec.c_out {
            return Err(Error::InvalidSpec("identity weights need a square 1x1 spec".into()));
        }
        let mut w = Self::zeros(spec)?;
        let per = spec.c_in_per_group();
        for co in 0..spec.c_out {
            *w.weight.at_mut(co, co % per, 0, 0) = T::one();
        }
        Ok(w)
    }

    pub fn check(&self, spec: &ConvSpec) -> Result<()> {
        spec.validate()?;
        if self.weight.dims() != spec.weight_dims() {
            return Err(Error::InvalidSpec(format!(
                "weight dims {} do not match spec {}",
                self.weight.dims(),
                spec.weight_dims()
            )));
        }
        match (&self.bias, spec.bias) {
            (Some(b), true) if b.len() == spec.c_out => Ok(()),
            (None, false) => Ok(()),
            _ => Err(Error::InvalidSpec("bias presence or length does not match spec".into())),
        }
    }

    #[inline]
    fn bias_at(&self, co: usize) -> Option<f64> {
        self.bias.as_ref().map(|b| b[co].as_f64())
    }

    /// Number of stored scalars.
    pub fn len(&self) -> usize {
        self.weight.len() + self.bias.as_ref().map_or(0, Vec::len)
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Weight then bias, flattened.
    pub fn flat(&self) -> Vec<T> {
        let mut v = self.weight.data().to_vec();
        if let Some(b) = &self.bias {
            v.extend_from_slice(b);
        }
        v
    }

    /// Mutable access to the `i`-th scalar in [`Self::flat`] order.
    pub fn flat_mut(&mut self, i: usize) -> &mut T {
        let wl = self.weight.len();
        if i < wl {
            &mut self.weight.data_mut()[i]
        } else {
            &mut self.bias.as_mut().expect("index past weight without bias")[i - wl]
        }
    }
}

/// A spec together with its weights.
#[derive(Debug, Clone, PartialEq)]
pub struct ConvLayer<T> {
    pub spec: ConvSpec,
    pub weights: ConvWeights<T>,
}

impl<T: Scalar> ConvLayer<T> {
    pub fn new(spec: ConvSpec, weights: ConvWeights<T>) -> Result<Self> {
        weights.check(&spec)?;
        Ok(ConvLayer { spec, weights })
    }

    pub fn zeros(spec: ConvSpec) -> Result<Self> {
        Ok(ConvLayer {
            weights: ConvWeights::zeros(&spec)?,
            spec,
        })
    }

    pub fn init(spec: ConvSpec, seed: Seed) -> Result<Self> {
        Ok(ConvLayer {
            weights: ConvWeights::init(&spec, seed)?,
            spec,
        })
    }

    pub fn forward(&self, input: &Tensor<T>) -> Result<Tensor<T>> {
        conv2d(input, &self.spec, &self.weights)
    }

    pub fn backward(&self, input: &Tensor<T>, grad_out: &Tensor<T>) -> Result<ConvGrad<T>> {
        conv2d_backward(input, &self.spec, &self.weights, grad_out)
    }
}

/// Gradients of [`conv2d`] with respect to its input and parameters.
#[derive(Debug, Clone)]
pub struct ConvGrad<T> {
    pub input: Tensor<T>,
    pub weights: ConvWeights<T>,
}

/// Valid output range `[lo, hi)` along one axis for tap offset `off = tap*d`.
#[inline]
fn valid_range(out_len: usize, in_len: usize, off: usize, pad: usize) -> (usize, usize) {
    // input index = o + off - pad must lie in [0, in_len)
    let lo = pad.saturating_sub(off);
    let hi = (in_len + pad).saturating_sub(off).min(out_len);
    (lo, hi.max(lo))
}

/// Direct loop reference. Returns the output and the number of
/// multiply-accumulates executed, padded taps included.
pub fn conv2d_reference<T: Scalar>(input: &Tensor<T>, spec: &ConvSpec, w: &ConvWeights<T>) -> Result<(Tensor<T>, u64)> {
    w.check(spec)?;
    let id = input.dims();
    let od = spec.output_dims(id)?;
    let (cin_g, cout_g) = (spec.c_in_per_group(), spec.c_out_per_group());
    let (k, d, p) = (spec.k, spec.dilation, spec.padding as isize);
    let mut out = Vec::with_capacity(od.len());
    let mut macs = 0u64;
    for n in 0..od.n {
        for co in 0..od.c {
            let ci0 = (co / cout_g) * cin_g;
            for oy in 0..od.h {
                for ox in 0..od.w {
                    let mut acc = 0.0f64;
                    for cil in 0..cin_g {
                        for ky in 0..k {
                            for kx in 0..k {
                                let iy = oy as isize + (ky * d) as isize - p;
                                let ix = ox as isize + (kx * d) as isize - p;
                                let x = if iy >= 0 && ix >= 0 && (iy as usize) < id.h && (ix as usize) < id.w {
                                    input.at(n, ci0 + cil, iy as usize, ix as usize).as_f64()
                                } else {
                                    0.0
                                };
                                acc += w.weight.at(co, cil, ky, kx).as_f64() * x;
                                macs += 1;
                            }
                        }
                    }
                    if let Some(b) = w.bias_at(co) {
                        acc += b;
                    }
                    out.push(T::from_f64(acc));
                }
            }
        }
    }
    Ok((Tensor::new(od, out)?, macs))
}

/// Convolution forward pass.
pub fn conv2d<T: Scalar>(input: &Tensor<T>, spec: &ConvSpec, w: &ConvWeights<T>) -> Result<Tensor<T>> {
    w.check(spec)?;
    let id = input.dims();
    let od = spec.output_dims(id)?;
    let (cin_g, cout_g) = (spec.c_in_per_group(), spec.c_out_per_group());
    let (k, d, p) = (spec.k, spec.dilation, spec.padding);
    let oplane = od.plane();
    let wdata = w.weight.data();
    let mut out = vec![T::zero(); od.len()];

    out.par_chunks_mut(oplane).enumerate().for_each_init(
        || vec![0.0f64; oplane],
        |acc, (idx, chunk)| {
            let (n, co) = (idx / od.c, idx % od.c);
            let ci0 = (co / cout_g) * cin_g;
            acc.fill(0.0);
            for cil in 0..cin_g {
                let xp = input.plane(n, ci0 + cil);
                for ky in 0..k {
                    let (y0, y1) = valid_range(od.h, id.h, ky * d, p);
                    for kx in 0..k {
                        let wv = wdata[((co * cin_g + cil) * k + ky) * k + kx].as_f64();
                        let (x0, x1) = valid_range(od.w, id.w, kx * d, p);
                        if x0 >= x1 {
                            continue;
                        }
                        for oy in y0..y1 {
                            let iy = oy + ky * d - p;
                            let xrow = &xp[iy * id.w + x0 + kx * d - p..iy * id.w + x1 + kx * d - p];
                            let arow = &mut acc[oy * od.w + x0..oy * od.w + x1];
                            for (a, &x) in arow.iter_mut().zip(xrow) {
                                *a += wv * x.as_f64();
                            }
                        }
                    }
                }
            }
            match w.bias_at(co) {
                Some(b) => {
                    for (o, &a) in chunk.iter_mut().zip(acc.iter()) {
                        *o = T::from_f64(a + b);
                    }
                }
                None => {
                    for (o, &a) in chunk.iter_mut().zip(acc.iter()) {
                        *o = T::from_f64(a);
                    }
                }
            }
        },
    );
    Tensor::new(od, out)
}

/// Exact gradients of [`conv2d`] given the upstream gradient.
pub fn conv2d_backward<T: Scalar>(
    input: &Tensor<T>,
    spec: &ConvSpec,
    w: &ConvWeights<T>,
    grad_out: &Tensor<T>,
) -> Result<ConvGrad<T>> {
    w.check(spec)?;
    let id = input.dims();
    let od = spec.output_dims(id)?;
    od.check_same(&grad_out.dims())?;
    let (cin_g, cout_g) = (spec.c_in_per_group(), spec.c_out_per_group());
    let (k, d, p) = (spec.k, spec.dilation, spec.padding);
    let wdata = w.weight.data();
    let iplane = id.plane();

    // d/dx: each input plane gathers from the output planes of its group.
    let mut gin = vec![T::zero(); id.len()];
    gin.par_chunks_mut(iplane).enumerate().for_each_init(
        || vec![0.0f64; iplane],
        |acc, (idx, chunk)| {
            let (n, ci) = (idx / id.c, idx % id.c);
            let (grp, cil) = (ci / cin_g, ci % cin_g);
            acc.fill(0.0);
            for co in grp * cout_g..(grp + 1) * cout_g {
                let gp = grad_out.plane(n, co);
                for ky in 0..k {
                    let (y0, y1) = valid_range(od.h, id.h, ky * d, p);
                    for kx in 0..k {
                        let wv = wdata[((co * cin_g + cil) * k + ky) * k + kx].as_f64();
                        let (x0, x1) = valid_range(od.w, id.w, kx * d, p);
                        if x0 >= x1 {
                            continue;
                        }
                        for oy in y0..y1 {
                            let iy = oy + ky * d - p;
                            let grow = &gp[oy * od.w + x0..oy * od.w + x1];
                            let arow = &mut acc[iy * id.w + x0 + kx * d - p..iy * id.w + x1 + kx * d - p];
                            for (a, &g) in arow.iter_mut().zip(grow) {
                                *a += wv * g.as_f64();
                            }
                        }
                    }
                }
            }
            for (o, &a) in chunk.iter_mut().zip(acc.iter()) {
                *o = T::from_f64(a);
            }
        },
    );

    // d/dw: one kernel slice per output channel.
    let wlen = cin_g * k * k;
    let mut gw = vec![T::zero(); spec.c_out * wlen];
    gw.par_chunks_mut(wlen).enumerate().for_each(|(co, chunk)| {
        let ci0 = (co / cout_g) * cin_g;
        for cil in 0..cin_g {
            for ky in 0..k {
                let (y0, y1) = valid_range(od.h, id.h, ky * d, p);
                for kx in 0..k {
                    let (x0, x1) = valid_range(od.w, id.w, kx * d, p);
                    let mut acc = 0.0f64;
                    for n in 0..od.n {
                        let gp = grad_out.plane(n, co);
                        let xp = input.plane(n, ci0 + cil);
                        for oy in y0..y1 {
                            let iy = oy + ky * d - p;
                            for ox in x0..x1 {
                                let ix = ox + kx * d - p;
                                acc += gp[oy * od.w + ox].as_f64() * xp[iy * id.w + ix].as_f64();
                            }
                        }
                    }
                    chunk[(cil * k + ky) * k + kx] = T::from_f64(acc);
                }
            }
        }
    });

    let gb = spec.bias.then(|| {
        (0..spec.c_out)
            .map(|co| {
                let s = (0..od.n)
                    .flat_map(|n| grad_out.plane(n, co).iter())
                    .fold(0.0f64, |a, g| a + g.as_f64());
                T::from_f64(s)
            })
            .collect()
    });

    Ok(ConvGrad {
        input: Tensor::new(id, gin)?,
        weights: ConvWeights {
            weight: Tensor::new(spec.weight_dims(), gw)?,
            bias: gb,
        },
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::nn::gradcheck::{finite_diff_grad, max_relative_error, sample_coords};

    #[test]
    fn pointwise_identity() {
        let spec = ConvSpec::pointwise(1, 1, 1).bias(false);
        let w = ConvWeights {
            weight: Tensor::<f32>::ones((1, 1, 1, 1)).unwrap(),
            bias: None,
        };
        let x = Tensor::<f32>::seeded_uniform((2, 1, 3, 4), -1.0, 1.0, Seed(1)).unwrap();
        assert!(conv2d(&x, &spec, &w).unwrap().bitwise_eq(&x));
    }

    #[test]
    fn depthwise_box_sum_on_constant() {
        let spec = ConvSpec::depthwise(2, 3, 1).bias(false);
        let w = ConvWeights {
            weight: Tensor::<f32>::ones(spec.weight_dims()).unwrap(),
            bias: None,
        };
        let x = Tensor::<f32>::full((1, 2, 4, 4), 5.0).unwrap();
        let y = conv2d(&x, &spec, &w).unwrap();
        assert_eq!(y.dims(), x.dims());
        for c in 0..2 {
            assert_eq!(y.at(0, c, 1, 1), 45.0);
            assert_eq!(y.at(0, c, 2, 2), 45.0);
            assert_eq!(y.at(0, c, 0, 0), 20.0);
            assert_eq!(y.at(0, c, 3, 3), 20.0);
            assert_eq!(y.at(0, c, 0, 3), 20.0);
            assert_eq!(y.at(0, c, 0, 1), 30.0);
        }
    }

    #[test]
    fn grouped_pointwise_identity() {
        let spec = ConvSpec::pointwise(4, 4, 2).bias(false);
        let w = ConvWeights::<f32>::identity(&spec).unwrap();
        assert_eq!(w.weight.data(), &[1.0, 0.0, 0.0, 1.0, 1.0, 0.0, 0.0, 1.0]);
        let x = Tensor::<f32>::seeded_uniform((1, 4, 3, 3), -1.0, 1.0, Seed(2)).unwrap();
        assert!(conv2d(&x, &spec, &w).unwrap().bitwise_eq(&x));
    }

    #[test]
    fn spec_validation() {
        assert!(ConvSpec::pointwise(3, 4, 2).validate().is_err());
        assert!(ConvSpec::pointwise(4, 3, 2).validate().is_err());
        let x = Tensor::<f32>::zeros((1, 3, 2, 2)).unwrap();
        let spec = ConvSpec::pointwise(3, 2, 2);
        let w = ConvWeights {
            weight: Tensor::zeros((2, 1, 1, 1)).unwrap(),
            bias: None,
        };
        assert!(matches!(conv2d(&x, &spec, &w), Err(Error::InvalidSpec(_))));
        assert!(ConvSpec::depthwise(4, 5, 2).is_same());
        assert_eq!(ConvSpec::depthwise(4, 5, 2).padding, 4);
    }

    #[test]
    fn nonpositive_output_is_an_error() {
        let spec = ConvSpec::new(1, 1, 5).padding(0).bias(false);
        let w = ConvWeights::<f32>::zeros(&spec).unwrap();
        let x = Tensor::<f32>::zeros((1, 1, 3, 3)).unwrap();
        assert!(matches!(conv2d(&x, &spec, &w), Err(Error::NonPositiveOutput { .. })));
    }

    #[test]
    fn channel_mismatch_is_an_error() {
        let spec = ConvSpec::pointwise(2, 2, 1);
        let w = ConvWeights::<f32>::zeros(&spec).unwrap();
        let x = Tensor::<f32>::zeros((1, 3, 2, 2)).unwrap();
        let e = conv2d(&x, &spec, &w).unwrap_err();
        assert!(e.to_string().contains("channel mismatch"));
    }

    #[test]
    fn fast_kernel_matches_reference_bitwise() {
        let specs = [
            ConvSpec::new(3, 5, 3),
            ConvSpec::depthwise(4, 5, 2),
            ConvSpec::pointwise(8, 6, 2),
            ConvSpec::new(4, 4, 3).groups(2).padding(0),
            ConvSpec::new(2, 2, 5).dilation(2).padding(2).bias(false),
            ConvSpec::new(2, 4, 4).padding(2),
        ];
        for (i, spec) in specs.iter().enumerate() {
            let s = Seed(100 + i as u64);
            let w = ConvWeights::<f32>::init(spec, s).unwrap();
            let x = Tensor::<f32>::seeded_uniform((2, spec.c_in, 7, 6), -2.0, 2.0, s.derive("x")).unwrap();
            let (r, _) = conv2d_reference(&x, spec, &w).unwrap();
            let f = conv2d(&x, spec, &w).unwrap();
            assert!(f.bitwise_eq(&r), "spec {spec:?}");
        }
    }

    #[test]
    fn bias_gradient_is_plane_sum() {
        let spec = ConvSpec::depthwise(3, 3, 1);
        let w = ConvWeights::<f64>::init(&spec, Seed(1)).unwrap();
        let x = Tensor::<f64>::seeded_uniform((1, 3, 4, 5), -1.0, 1.0, Seed(2)).unwrap();
        let g = Tensor::<f64>::ones((1, 3, 4, 5)).unwrap();
        let grad = conv2d_backward(&x, &spec, &w, &g).unwrap();
        assert_eq!(grad.weights.bias.unwrap(), vec![20.0; 3]);
    }

    #[test]
    fn identity_backward_passes_gradient_through() {
        let spec = ConvSpec::pointwise(2, 2, 2).bias(false);
        let w = ConvWeights::<f32>::identity(&spec).unwrap();
        let x = Tensor::<f32>::seeded_uniform((1, 2, 3, 3), -1.0, 1.0, Seed(3)).unwrap();
        let g = Tensor::<f32>::seeded_uniform((1, 2, 3, 3), -1.0, 1.0, Seed(4)).unwrap();
        let grad = conv2d_backward(&x, &spec, &w, &g).unwrap();
        assert!(grad.input.bitwise_eq(&g));
    }

    #[test]
    fn backward_shape_mismatch() {
        let spec = ConvSpec::depthwise(2, 3, 1);
        let w = ConvWeights::<f64>::zeros(&spec).unwrap();
        let x = Tensor::<f64>::zeros((1, 2, 4, 4)).unwrap();
        let g = Tensor::<f64>::zeros((1, 2, 4, 5)).unwrap();
        assert!(conv2d_backward(&x, &spec, &w, &g).is_err());
    }

    fn check_all_grads(spec: ConvSpec, dims: Dims, seed: u64) {
        let s = Seed(seed);
        let w = ConvWeights::<f64>::init(&spec, s).unwrap();
        let x = Tensor::<f64>::seeded_uniform(dims, -1.0, 1.0, s.derive("x")).unwrap();
        let od = spec.output_dims(dims).unwrap();
        let r = Tensor::<f64>::seeded_uniform(od, -1.0, 1.0, s.derive("r")).unwrap();
        let grad = conv2d_backward(&x, &spec, &w, &r).unwrap();

        let coords = sample_coords(x.len(), 50, s.derive("c"));
        let loss = |t: &Tensor<f64>| conv2d(t, &spec, &w).unwrap().dot_f64(&r).unwrap();
        let num = finite_diff_grad(loss, &x, &coords, 1e-3).unwrap();
        let ana: Vec<f64> = coords.iter().map(|&i| grad.input.data()[i]).collect();
        assert!(max_relative_error(&ana, &num) <= 1e-5);

        let flat = grad.weights.flat();
        for i in sample_coords(flat.len(), 30, s.derive("wc")) {
            let f = |h: f64| {
                let mut wp = w.clone();
                *wp.flat_mut(i) += h;
                conv2d(&x, &spec, &wp).unwrap().dot_f64(&r).unwrap()
            };
            let num = (f(1e-3) - f(-1e-3)) / 2e-3;
            assert!(max_relative_error(&[flat[i]], &[num]) <= 1e-5, "weight {i}");
        }
    }

    #[test]
    fn gradients_match_finite_differences() {
        check_all_grads(ConvSpec::depthwise(3, 3, 1), Dims::new(1, 3, 5, 5), 1);
        check_all_grads(ConvSpec::depthwise(2, 5, 2), Dims::new(2, 2, 6, 7), 2);
        check_all_grads(ConvSpec::pointwise(4, 6, 2), Dims::new(1, 4, 3, 3), 3);
        check_all_grads(ConvSpec::new(2, 3, 3).padding(0), Dims::new(1, 2, 5, 4), 4);
        check_all_grads(ConvSpec::new(1, 1, 1), Dims::new(1, 1, 2, 2), 5);
    }

    #[test]
    fn linearity_without_bias() {
        let spec = ConvSpec::new(2, 3, 3).groups(1).bias(false);
        let w = ConvWeights::<f32>::init(&spec, Seed(8)).unwrap();
        let x = Tensor::<f32>::seeded_uniform((1, 2, 6, 6), -1.0, 1.0, Seed(9)).unwrap();
        let y = Tensor::<f32>::seeded_uniform((1, 2, 6, 6), -1.0, 1.0, Seed(10)).unwrap();
        let (a, b) = (0.75f32, -1.5f32);
        let lhs = conv2d(&x.scale(a).add(&y.scale(b)).unwrap(), &spec, &w).unwrap();
        let rhs = conv2d(&x, &spec, &w)
            .unwrap()
            .scale(a)
            .add(&conv2d(&y, &spec, &w).unwrap().scale(b))
            .unwrap();
        let scale = rhs.data().iter().fold(0.0f64, |m, v| m.max(v.abs() as f64));
        assert!(lhs.max_abs_diff(&rhs).unwrap() <= 1e-6 * scale.max(1.0));
    }

    #[test]
    fn impulse_shift_equivariance() {
        let spec = ConvSpec::new(1, 2, 3).bias(false);
        let w = ConvWeights::<f32>::init(&spec, Seed(6)).unwrap();
        let a = conv2d(&Tensor::impulse((1, 1, 9, 9), 0, 0, 4, 4).unwrap(), &spec, &w).unwrap();
        let b = conv2d(&Tensor::impulse((1, 1, 9, 9), 0, 0, 4, 5).unwrap(), &spec, &w).unwrap();
        for c in 0..2 {
            for y in 0..9 {
                for x in 0..8 {
                    assert_eq!(a.at(0, c, y, x).to_bits(), b.at(0, c, y, x + 1).to_bits());
                }
            }
        }
    }
}
