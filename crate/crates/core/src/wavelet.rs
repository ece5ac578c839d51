//! Orthonormal 2-D Haar transform and sub-band energy statistics.
//!
//! For each 2x2 block `[[a, b], [c, d]]`:
//!
//! ```text
//! LL = (a + b + c + d) / 2     LH = ((a + b) - (c + d)) / 2
//! HL = ((a + c) - (b + d)) / 2 HH = (a - b - c + d) / 2
//! ```
//!
//! LH responds to vertical variation (horizontal edges), HL to horizontal
//! variation (vertical edges). Each level preserves the sum of squares.

use crate::error::{Error, Result};
use crate::scalar::Scalar;

/// Row-major single-channel array of arbitrary size.
#[derive(Debug, Clone, PartialEq)]
pub struct Band<T> {
    pub h: usize,
    pub w: usize,
    pub data: Vec<T>,
}

impl<T: Scalar> Band<T> {
    pub fn new(h: usize, w: usize, data: Vec<T>) -> Result<Self> {
        if h == 0 || w == 0 {
            return Err(Error::InvalidDims(vec![h, w]));
        }
        if data.len() != h * w {
            return Err(Error::LengthMismatch {
                expected: h * w,
                actual: data.len(),
            });
        }
        Ok(Band { h, w, data })
    }

    pub fn zeros(h: usize, w: usize) -> Result<Self> {
        Self::new(h, w, vec![T::zero(); h * w])
    }

    #[inline]
    pub fn at(&self, y: usize, x: usize) -> T {
        self.data[y * self.w + x]
    }

    /// Sum of squares in `f64`.
    pub fn energy(&self) -> f64 {
        self.data.iter().map(|v| v.as_f64() * v.as_f64()).sum()
    }
}

/// Image with even, positive dimensions and finite pixels.
#[derive(Debug, Clone, PartialEq)]
pub struct GrayImage<T>(Band<T>);

impl<T: Scalar> GrayImage<T> {
    pub fn new(h: usize, w: usize, pixels: Vec<T>) -> Result<Self> {
        let band = Band::new(h, w, pixels)?;
        if !h.is_multiple_of(2) || !w.is_multiple_of(2) {
            return Err(Error::OddDims { h, w });
        }
        if let Some(i) = band.data.iter().position(|v| !v.is_finite()) {
            return Err(Error::NonFinite(i));
        }
        Ok(GrayImage(band))
    }

    /// Accepts any size, extending an odd last row/column by repeating it
    /// (half-sample symmetric reflection).
    pub fn from_padded(h: usize, w: usize, pixels: Vec<T>) -> Result<Self> {
        let band = Band::new(h, w, pixels)?;
        let (ph, pw) = (h + h % 2, w + w % 2);
        if (ph, pw) == (h, w) {
            return Self::new(h, w, band.data);
        }
        let mut out = Vec::with_capacity(ph * pw);
        for y in 0..ph {
            let sy = y.min(h - 1);
            for x in 0..pw {
                out.push(band.at(sy, x.min(w - 1)));
            }
        }
        Self::new(ph, pw, out)
    }

    pub fn h(&self) -> usize {
        self.0.h
    }

    pub fn w(&self) -> usize {
        self.0.w
    }

    pub fn pixels(&self) -> &[T] {
        &self.0.data
    }

    pub fn energy(&self) -> f64 {
        self.0.energy()
    }

    pub fn as_band(&self) -> &Band<T> {
        &self.0
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SubbandSet<T> {
    pub ll: Band<T>,
    pub lh: Band<T>,
    pub hl: Band<T>,
    pub hh: Band<T>,
}

pub fn haar_dwt2<T: Scalar>(img: &GrayImage<T>) -> SubbandSet<T> {
    let (h2, w2) = (img.h() / 2, img.w() / 2);
    let src = img.as_band();
    let n = h2 * w2;
    let (mut ll, mut lh, mut hl, mut hh) = (
        Vec::with_capacity(n),
        Vec::with_capacity(n),
        Vec::with_capacity(n),
        Vec::with_capacity(n),
    );
    for y in 0..h2 {
        for x in 0..w2 {
            let a = src.at(2 * y, 2 * x).as_f64();
            let b = src.at(2 * y, 2 * x + 1).as_f64();
            let c = src.at(2 * y + 1, 2 * x).as_f64();
            let d = src.at(2 * y + 1, 2 * x + 1).as_f64();
            ll.push(T::from_f64((a + b + c + d) * 0.5));
            lh.push(T::from_f64(((a + b) - (c + d)) * 0.5));
            hl.push(T::from_f64(((a + c) - (b + d)) * 0.5));
            hh.push(T::from_f64((a - b - c + d) * 0.5));
        }
    }
    let band = |data| Band { h: h2, w: w2, data };
    SubbandSet {
        ll: band(ll),
        lh: band(lh),
        hl: band(hl),
        hh: band(hh),
    }
}

pub fn haar_idwt2<T: Scalar>(s: &SubbandSet<T>) -> Result<GrayImage<T>> {
    let (h2, w2) = (s.ll.h, s.ll.w);
    for b in [&s.lh, &s.hl, &s.hh] {
        if (b.h, b.w) != (h2, w2) {
            return Err(Error::InvalidDims(vec![h2, w2, b.h, b.w]));
        }
    }
    let w = 2 * w2;
    let mut out = vec![T::zero(); 4 * h2 * w2];
    for y in 0..h2 {
        for x in 0..w2 {
            let i = y * w2 + x;
            let (ll, lh, hl, hh) = (
                s.ll.data[i].as_f64(),
                s.lh.data[i].as_f64(),
                s.hl.data[i].as_f64(),
                s.hh.data[i].as_f64(),
            );
            out[2 * y * w + 2 * x] = T::from_f64((ll + lh + hl + hh) * 0.5);
            out[2 * y * w + 2 * x + 1] = T::from_f64((ll + lh - hl - hh) * 0.5);
            out[(2 * y + 1) * w + 2 * x] = T::from_f64((ll - lh + hl - hh) * 0.5);
            out[(2 * y + 1) * w + 2 * x + 1] = T::from_f64((ll - lh - hl + hh) * 0.5);
        }
    }
    GrayImage::new(2 * h2, w, out)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EnergyReport {
    pub e_ll: f64,
    pub e_lh: f64,
    pub e_hl: f64,
    pub e_hh: f64,
    /// Detail-band share of the total; zero for an all-zero image.
    pub hf_ratio: f64,
}

impl EnergyReport {
    pub fn total(&self) -> f64 {
        self.e_ll + self.e_lh + self.e_hl + self.e_hh
    }

    /// Share of LH + HL (the edge bands) in the total.
    pub fn edge_ratio(&self) -> f64 {
        let t = self.total();
        if t > 0.0 {
            (self.e_lh + self.e_hl) / t
        } else {
            0.0
        }
    }
}

pub fn subband_energy<T: Scalar>(s: &SubbandSet<T>) -> EnergyReport {
    let (e_ll, e_lh, e_hl, e_hh) = (s.ll.energy(), s.lh.energy(), s.hl.energy(), s.hh.energy());
    let total = e_ll + e_lh + e_hl + e_hh;
    let hf_ratio = if total > 0.0 { (e_lh + e_hl + e_hh) / total } else { 0.0 };
    EnergyReport {
        e_ll,
        e_lh,
        e_hl,
        e_hh,
        hf_ratio,
    }
}

/// `levels` successive decompositions, each of the previous LL band (padded
/// to even size when needed).
pub fn decompose<T: Scalar>(img: &GrayImage<T>, levels: usize) -> Result<Vec<SubbandSet<T>>> {
    if levels == 0 {
        return Err(Error::InvalidConfig("levels must be at least 1".into()));
    }
    let mut out = Vec::with_capacity(levels);
    let mut cur = img.clone();
    for _ in 0..levels {
        let s = haar_dwt2(&cur);
        cur = GrayImage::from_padded(s.ll.h, s.ll.w, s.ll.data.clone())?;
        out.push(s);
    }
    Ok(out)
}

/// Per-level energy reports for an RGB/IR pair.
#[derive(Debug, Clone, PartialEq)]
pub struct PairReport {
    pub h: usize,
    pub w: usize,
    pub rgb: Vec<EnergyReport>,
    pub ir: Vec<EnergyReport>,
}

pub fn analyze_pair<T: Scalar>(rgb: &GrayImage<T>, ir: &GrayImage<T>, levels: usize) -> Result<PairReport> {
    if (rgb.h(), rgb.w()) != (ir.h(), ir.w()) {
        return Err(Error::ShapeMismatch {
            axis: if rgb.h() != ir.h() {
                crate::error::Axis::H
            } else {
                crate::error::Axis::W
            },
            left: if rgb.h() != ir.h() { rgb.h() } else { rgb.w() },
            right: if rgb.h() != ir.h() { ir.h() } else { ir.w() },
        });
    }
    let report =
        |img| -> Result<Vec<EnergyReport>> { Ok(decompose(img, levels)?.iter().map(subband_energy).collect()) };
    Ok(PairReport {
        h: rgb.h(),
        w: rgb.w(),
        rgb: report(rgb)?,
        ir: report(ir)?,
    })
}

/// Luminance `0.299 R + 0.587 G + 0.114 B`.
pub fn luminance(r: f64, g: f64, b: f64) -> f64 {
    0.299 * r + 0.587 * g + 0.114 * b
}
