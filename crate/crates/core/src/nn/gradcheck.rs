//! Central finite differences and error metrics for gradient verification.

use crate::error::{Error, Result};
use crate::rng::Seed;
use crate::scalar::Scalar;
use crate::tensor::Tensor;

/// Denominator floor used by [`relative_error`].
pub const REL_FLOOR: f64 = 1e-8;

/// Central differences of `f` at the listed flat coordinates of `t`.
///
/// Each coordinate is moved to `t_i ± h` (rounded to the element type) and
/// the difference of `f` is divided by the realised step, which is exactly
/// `2h` for `f64` tensors.
pub fn finite_diff_grad<T, F>(f: F, t: &Tensor<T>, coords: &[usize], h: f64) -> Result<Vec<f64>>
where
    T: Scalar,
    F: Fn(&Tensor<T>) -> f64,
{
    if h.is_nan() || h <= 0.0 {
        return Err(Error::EmptyRange { lo: 0.0, hi: h });
    }
    let mut probe = t.clone();
    coords
        .iter()
        .map(|&i| {
            if i >= t.len() {
                return Err(Error::IndexOutOfBounds {
                    index: vec![i],
                    dims: vec![t.len()],
                });
            }
            let x = t.data()[i];
            let up = T::from_f64(x.as_f64() + h);
            let down = T::from_f64(x.as_f64() - h);
            probe.data_mut()[i] = up;
            let fp = f(&probe);
            probe.data_mut()[i] = down;
            let fm = f(&probe);
            probe.data_mut()[i] = x;
            Ok((fp - fm) / (up.as_f64() - down.as_f64()))
        })
        .collect()
}

/// `|a - b| / max(|a|, |b|, REL_FLOOR)`.
pub fn relative_error(a: f64, b: f64) -> f64 {
    (a - b).abs() / a.abs().max(b.abs()).max(REL_FLOOR)
}

pub fn max_relative_error(analytic: &[f64], numeric: &[f64]) -> f64 {
    assert_eq!(analytic.len(), numeric.len());
    analytic
        .iter()
        .zip(numeric)
        .map(|(&a, &n)| relative_error(a, n))
        .fold(0.0, f64::max)
}

/// `count` distinct indices below `len` (all of them when `count >= len`),
/// drawn by a seeded partial Fisher–Yates shuffle and returned sorted.
pub fn sample_coords(len: usize, count: usize, seed: Seed) -> Vec<usize> {
    let mut idx: Vec<usize> = (0..len).collect();
    let take = count.min(len);
    for i in 0..take {
        let j = i + (seed.word(i as u64) % (len - i) as u64) as usize;
        idx.swap(i, j);
    }
    idx.truncate(take);
    idx.sort_unstable();
    idx
}

/// Outcome of comparing an analytic gradient with finite differences.
#[derive(Debug, Clone, PartialEq)]
pub struct GradCheck {
    pub name: String,
    pub checked: usize,
    pub max_rel_err: f64,
    pub worst_coord: usize,
}

impl GradCheck {
    pub fn passes(&self, tol: f64) -> bool {
        self.max_rel_err <= tol
    }
}

/// Compares `analytic` (a full gradient tensor) against central differences
/// of `f` at `coords`.
pub fn check_gradient<T, F>(
    name: &str,
    f: F,
    t: &Tensor<T>,
    analytic: &Tensor<T>,
    coords: &[usize],
    h: f64,
) -> Result<GradCheck>
where
    T: Scalar,
    F: Fn(&Tensor<T>) -> f64,
{
    t.dims().check_same(&analytic.dims())?;
    let numeric = finite_diff_grad(f, t, coords, h)?;
    let mut worst = (0.0, coords.first().copied().unwrap_or(0));
    for (&i, &n) in coords.iter().zip(&numeric) {
        let e = relative_error(analytic.data()[i].as_f64(), n);
        if e > worst.0 {
            worst = (e, i);
        }
    }
    Ok(GradCheck {
        name: name.to_string(),
        checked: coords.len(),
        max_rel_err: worst.0,
        worst_coord: worst.1,
    })
}
