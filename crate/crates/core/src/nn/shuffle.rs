//! Channel shuffle: view channels as a `(g, c/g)` grid, transpose, flatten.
//!
//! Output channel `j` reads input channel `(j % g) * (c/g) + j / g`. For
//! `c = 6, g = 3` that gives `[0, 2, 4, 1, 3, 5]`. Shuffling with `c/g`
//! groups undoes it.

use crate::error::{Error, Result};
use crate::scalar::Scalar;
use crate::tensor::Tensor;

/// Source channel for every output channel.
pub fn shuffle_permutation(c: usize, g: usize) -> Result<Vec<usize>> {
    if g == 0 || !c.is_multiple_of(g) {
        return Err(Error::NotDivisible {
            what: "channel count",
            value: c,
            divisor: g,
        });
    }
    let per = c / g;
    Ok((0..c).map(|j| (j % g) * per + j / g).collect())
}

pub fn channel_shuffle<T: Scalar>(t: &Tensor<T>, g: usize) -> Result<Tensor<T>> {
    let d = t.dims();
    let perm = shuffle_permutation(d.c, g)?;
    let p = d.plane();
    let mut out = Vec::with_capacity(t.len());
    for n in 0..d.n {
        for &src in &perm {
            out.extend_from_slice(t.plane(n, src));
        }
    }
    debug_assert_eq!(out.len(), p * d.c * d.n);
    Tensor::new(d, out)
}

/// Gradient of [`channel_shuffle`]: the inverse permutation.
pub fn channel_shuffle_backward<T: Scalar>(grad_out: &Tensor<T>, g: usize) -> Result<Tensor<T>> {
    let c = grad_out.dims().c;
    if g == 0 || !c.is_multiple_of(g) {
        return Err(Error::NotDivisible {
            what: "channel count",
            value: c,
            divisor: g,
        });
    }
    channel_shuffle(grad_out, c / g)
}
