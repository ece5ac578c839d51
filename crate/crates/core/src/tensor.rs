//! Rank-4 NCHW tensors.

use std::fmt;

use crate::error::{Axis, Error, Result};
use crate::rng::Seed;
use crate::scalar::Scalar;

/// Tensor extents in NCHW order.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Dims {
    pub n: usize,
    pub c: usize,
    pub h: usize,
    pub w: usize,
}

impl Dims {
    pub const fn new(n: usize, c: usize, h: usize, w: usize) -> Self {
        Dims { n, c, h, w }
    }

    pub fn len(&self) -> usize {
        self.n * self.c * self.h * self.w
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn plane(&self) -> usize {
        self.h * self.w
    }

    pub fn as_array(&self) -> [usize; 4] {
        [self.n, self.c, self.h, self.w]
    }

    pub fn with_c(self, c: usize) -> Self {
        Dims { c, ..self }
    }

    fn validate(&self) -> Result<()> {
        if self.as_array().contains(&0) {
            return Err(Error::InvalidDims(self.as_array().to_vec()));
        }
        Ok(())
    }

    /// Checks that `n`, `h`, `w` agree, reporting the first differing axis.
    pub fn check_nhw(&self, other: &Dims) -> Result<()> {
        for (axis, l, r) in [
            (Axis::N, self.n, other.n),
            (Axis::H, self.h, other.h),
            (Axis::W, self.w, other.w),
        ] {
            if l != r {
                return Err(Error::ShapeMismatch {
                    axis,
                    left: l,
                    right: r,
                });
            }
        }
        Ok(())
    }

    /// Checks all four axes.
    pub fn check_same(&self, other: &Dims) -> Result<()> {
        self.check_nhw(other)?;
        if self.c != other.c {
            return Err(Error::ShapeMismatch {
                axis: Axis::C,
                left: self.c,
                right: other.c,
            });
        }
        Ok(())
    }

    #[inline]
    pub fn offset(&self, n: usize, c: usize, y: usize, x: usize) -> usize {
        ((n * self.c + c) * self.h + y) * self.w + x
    }
}

impl fmt::Display for Dims {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({}, {}, {}, {})", self.n, self.c, self.h, self.w)
    }
}

impl From<[usize; 4]> for Dims {
    fn from(d: [usize; 4]) -> Self {
        Dims::new(d[0], d[1], d[2], d[3])
    }
}

impl From<(usize, usize, usize, usize)> for Dims {
    fn from(d: (usize, usize, usize, usize)) -> Self {
        Dims::new(d.0, d.1, d.2, d.3)
    }
}

/// Dense row-major NCHW tensor.
#[derive(Clone, PartialEq)]
pub struct Tensor<T> {
    dims: Dims,
    data: Vec<T>,
}

impl<T: Scalar> Tensor<T> {
    pub fn new(dims: impl Into<Dims>, data: Vec<T>) -> Result<Self> {
        let dims = dims.into();
        dims.validate()?;
        if data.len() != dims.len() {
            return Err(Error::LengthMismatch {
                expected: dims.len(),
                actual: data.len(),
            });
        }
        Ok(Tensor { dims, data })
    }

    pub fn full(dims: impl Into<Dims>, value: T) -> Result<Self> {
        let dims = dims.into();
        dims.validate()?;
        Ok(Tensor {
            dims,
            data: vec![value; dims.len()],
        })
    }

    pub fn zeros(dims: impl Into<Dims>) -> Result<Self> {
        Self::full(dims, T::zero())
    }

    pub fn ones(dims: impl Into<Dims>) -> Result<Self> {
        Self::full(dims, T::one())
    }

    /// Builds a tensor by evaluating `f(n, c, y, x)` in storage order.
    pub fn from_fn(dims: impl Into<Dims>, mut f: impl FnMut(usize, usize, usize, usize) -> T) -> Result<Self> {
        let dims = dims.into();
        dims.validate()?;
        let mut data = Vec::with_capacity(dims.len());
        for n in 0..dims.n {
            for c in 0..dims.c {
                for y in 0..dims.h {
                    for x in 0..dims.w {
                        data.push(f(n, c, y, x));
                    }
                }
            }
        }
        Ok(Tensor { dims, data })
    }

    /// Zeros with a single `1` at `(n, c, y, x)`.
    pub fn impulse(dims: impl Into<Dims>, n: usize, c: usize, y: usize, x: usize) -> Result<Self> {
        let dims = dims.into();
        dims.validate()?;
        if n >= dims.n || c >= dims.c || y >= dims.h || x >= dims.w {
            return Err(Error::IndexOutOfBounds {
                index: vec![n, c, y, x],
                dims: dims.as_array().to_vec(),
            });
        }
        let mut t = Self::zeros(dims)?;
        t.data[dims.offset(n, c, y, x)] = T::one();
        Ok(t)
    }

    /// Uniform values in `[lo, hi)` from the counter-based generator in
    /// [`crate::rng`]; element `i` in storage order uses counter `i`.
    pub fn seeded_uniform(dims: impl Into<Dims>, lo: f64, hi: f64, seed: Seed) -> Result<Self> {
        let dims = dims.into();
        dims.validate()?;
        if lo.is_nan() || hi.is_nan() || lo >= hi {
            return Err(Error::EmptyRange { lo, hi });
        }
        let hi_t = T::from_f64(hi);
        let data = (0..dims.len() as u64)
            .map(|i| {
                let v = T::from_f64(lo + (hi - lo) * seed.unit(i));
                if v >= hi_t {
                    hi_t.next_below()
                } else {
                    v
                }
            })
            .collect();
        Ok(Tensor { dims, data })
    }

    pub fn dims(&self) -> Dims {
        self.dims
    }

    pub fn data(&self) -> &[T] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [T] {
        &mut self.data
    }

    pub fn into_data(self) -> Vec<T> {
        self.data
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    #[inline]
    pub fn at(&self, n: usize, c: usize, y: usize, x: usize) -> T {
        self.data[self.dims.offset(n, c, y, x)]
    }

    #[inline]
    pub fn at_mut(&mut self, n: usize, c: usize, y: usize, x: usize) -> &mut T {
        let o = self.dims.offset(n, c, y, x);
        &mut self.data[o]
    }

    /// Contiguous `h*w` slice for one `(n, c)` pair.
    pub fn plane(&self, n: usize, c: usize) -> &[T] {
        let p = self.dims.plane();
        let start = (n * self.dims.c + c) * p;
        &self.data[start..start + p]
    }

    pub fn map(&self, f: impl Fn(T) -> T) -> Self {
        Tensor {
            dims: self.dims,
            data: self.data.iter().map(|&v| f(v)).collect(),
        }
    }

    /// Converts element type through `f64`.
    pub fn cast<U: Scalar>(&self) -> Tensor<U> {
        Tensor {
            dims: self.dims,
            data: self.data.iter().map(|v| U::from_f64(v.as_f64())).collect(),
        }
    }

    pub fn first_non_finite(&self) -> Option<usize> {
        self.data.iter().position(|v| !v.is_finite())
    }

    pub fn all_finite(&self) -> bool {
        self.first_non_finite().is_none()
    }

    /// Equality of shape and of every element's bit pattern.
    pub fn bitwise_eq(&self, other: &Self) -> bool {
        self.dims == other.dims && self.data.iter().zip(&other.data).all(|(a, b)| a.bits() == b.bits())
    }

    /// Sum in `f64`, left to right.
    pub fn sum_f64(&self) -> f64 {
        self.data.iter().fold(0.0, |acc, v| acc + v.as_f64())
    }

    /// `Σ self ⊙ other` in `f64`, left to right.
    pub fn dot_f64(&self, other: &Self) -> Result<f64> {
        self.dims.check_same(&other.dims)?;
        Ok(self
            .data
            .iter()
            .zip(&other.data)
            .fold(0.0, |acc, (a, b)| acc + a.as_f64() * b.as_f64()))
    }

    pub fn max_abs_diff(&self, other: &Self) -> Result<f64> {
        self.dims.check_same(&other.dims)?;
        Ok(self
            .data
            .iter()
            .zip(&other.data)
            .map(|(a, b)| (a.as_f64() - b.as_f64()).abs())
            .fold(0.0, f64::max))
    }

    /// Concatenates along channels, `self` first.
    pub fn concat_channels(&self, other: &Self) -> Result<Self> {
        concat_channels(&[self, other])
    }

    pub fn split_channels(&self, parts: usize) -> Result<Vec<Self>> {
        if parts == 0 || !self.dims.c.is_multiple_of(parts) {
            return Err(Error::NotDivisible {
                what: "channel count",
                value: self.dims.c,
                divisor: parts,
            });
        }
        let sizes = vec![self.dims.c / parts; parts];
        self.split_channels_sizes(&sizes)
    }

    /// Splits into consecutive channel blocks of the given sizes.
    pub fn split_channels_sizes(&self, sizes: &[usize]) -> Result<Vec<Self>> {
        let total: usize = sizes.iter().sum();
        if total != self.dims.c || sizes.contains(&0) {
            return Err(Error::ShapeMismatch {
                axis: Axis::C,
                left: self.dims.c,
                right: total,
            });
        }
        let p = self.dims.plane();
        let mut out: Vec<Tensor<T>> = sizes
            .iter()
            .map(|&c| Tensor {
                dims: self.dims.with_c(c),
                data: Vec::with_capacity(self.dims.n * c * p),
            })
            .collect();
        for n in 0..self.dims.n {
            let mut c0 = 0;
            for (part, &c) in out.iter_mut().zip(sizes) {
                let start = (n * self.dims.c + c0) * p;
                part.data.extend_from_slice(&self.data[start..start + c * p]);
                c0 += c;
            }
        }
        Ok(out)
    }

    pub fn add(&self, other: &Self) -> Result<Self> {
        self.zip_with(other, |a, b| a + b)
    }

    pub fn mul(&self, other: &Self) -> Result<Self> {
        self.zip_with(other, |a, b| a * b)
    }

    pub fn add_assign(&mut self, other: &Self) -> Result<()> {
        self.dims.check_same(&other.dims)?;
        for (a, &b) in self.data.iter_mut().zip(&other.data) {
            *a = *a + b;
        }
        Ok(())
    }

    pub fn scale(&self, s: T) -> Self {
        self.map(|v| v * s)
    }

    pub fn zip_with(&self, other: &Self, f: impl Fn(T, T) -> T) -> Result<Self> {
        self.dims.check_same(&other.dims)?;
        Ok(Tensor {
            dims: self.dims,
            data: self.data.iter().zip(&other.data).map(|(&a, &b)| f(a, b)).collect(),
        })
    }

    /// Copy of sample `n` as a batch of one.
    pub fn sample(&self, n: usize) -> Result<Self> {
        if n >= self.dims.n {
            return Err(Error::IndexOutOfBounds {
                index: vec![n],
                dims: self.dims.as_array().to_vec(),
            });
        }
        let len = self.dims.c * self.dims.plane();
        Ok(Tensor {
            dims: Dims { n: 1, ..self.dims },
            data: self.data[n * len..(n + 1) * len].to_vec(),
        })
    }

    /// Stacks batches along `n`.
    pub fn stack_batch(parts: &[&Self]) -> Result<Self> {
        let first = parts.first().ok_or_else(|| Error::InvalidDims(vec![]))?;
        let mut n = 0;
        let mut data = Vec::new();
        for p in parts {
            p.dims.check_same(&Dims {
                n: p.dims.n,
                ..first.dims
            })?;
            n += p.dims.n;
            data.extend_from_slice(&p.data);
        }
        Ok(Tensor {
            dims: Dims { n, ..first.dims },
            data,
        })
    }
}

/// Concatenates along channels in argument order.
pub fn concat_channels<T: Scalar>(parts: &[&Tensor<T>]) -> Result<Tensor<T>> {
    let first = parts.first().ok_or_else(|| Error::InvalidDims(vec![]))?;
    for p in &parts[1..] {
        first.dims.check_nhw(&p.dims)?;
    }
    let c: usize = parts.iter().map(|p| p.dims.c).sum();
    let dims = first.dims.with_c(c);
    let plane = dims.plane();
    let mut data = Vec::with_capacity(dims.len());
    for n in 0..dims.n {
        for p in parts {
            let len = p.dims.c * plane;
            data.extend_from_slice(&p.data[n * len..(n + 1) * len]);
        }
    }
    Ok(Tensor { dims, data })
}

impl<T: fmt::Debug> fmt::Debug for Tensor<T> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        const SHOWN: usize = 8;
        write!(f, "Tensor<{}>{} [", std::any::type_name::<T>(), self.dims)?;
        for (i, v) in self.data.iter().take(SHOWN).enumerate() {
            if i > 0 {
                f.write_str(", ")?;
            }
            write!(f, "{v:?}")?;
        }
        if self.data.len() > SHOWN {
            write!(f, ", ... {} more", self.data.len() - SHOWN)?;
        }
        f.write_str("]")
    }
}
