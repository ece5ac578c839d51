//! Binary tensor files.
//!
//! Layout, all integers little-endian:
//!
//! | offset | size | field                         |
//! |--------|------|-------------------------------|
//! | 0      | 4    | magic `ICFT`                  |
//! | 4      | 4    | version, u32 = 1              |
//! | 8      | 4    | ndim, u32 = 4                 |
//! | 12     | 32   | n, c, h, w as u64             |
//! | 44     | 1    | dtype, u8 = 1 (f32)           |
//! | 45     | 4·len| f32 payload, NCHW row-major   |

use std::fs;
use std::path::Path;

use crate::error::{Error, Result};
use crate::tensor::{Dims, Tensor};

pub const MAGIC: &[u8; 4] = b"ICFT";
pub const VERSION: u32 = 1;
pub const HEADER_LEN: usize = 45;
const DTYPE_F32: u8 = 1;

pub fn encode_tensor(t: &Tensor<f32>) -> Vec<u8> {
    let mut out = Vec::with_capacity(HEADER_LEN + 4 * t.len());
    out.extend_from_slice(MAGIC);
    out.extend_from_slice(&VERSION.to_le_bytes());
    out.extend_from_slice(&4u32.to_le_bytes());
    for d in t.dims().as_array() {
        out.extend_from_slice(&(d as u64).to_le_bytes());
    }
    out.push(DTYPE_F32);
    for v in t.data() {
        out.extend_from_slice(&v.to_le_bytes());
    }
    out
}

fn u32_at(b: &[u8], at: usize) -> u32 {
    u32::from_le_bytes(b[at..at + 4].try_into().unwrap())
}

fn u64_at(b: &[u8], at: usize) -> u64 {
    u64::from_le_bytes(b[at..at + 8].try_into().unwrap())
}

/// Parses a complete file image. Checks run in header order, so the first
/// malformed field determines the error.
pub fn decode_tensor(bytes: &[u8]) -> Result<Tensor<f32>> {
    if bytes.len() >= 4 && &bytes[..4] != MAGIC {
        return Err(Error::BadMagic);
    }
    if bytes.len() < HEADER_LEN {
        if bytes.len() < 4 && !MAGIC.starts_with(bytes) {
            return Err(Error::BadMagic);
        }
        return Err(Error::TruncatedHeader(bytes.len()));
    }
    let version = u32_at(bytes, 4);
    if version != VERSION {
        return Err(Error::UnsupportedVersion(version));
    }
    let ndim = u32_at(bytes, 8);
    if ndim != 4 {
        return Err(Error::UnsupportedRank(ndim));
    }
    let raw: Vec<u64> = (0..4).map(|i| u64_at(bytes, 12 + 8 * i)).collect();
    let dtype = bytes[44];
    if dtype != DTYPE_F32 {
        return Err(Error::UnsupportedDtype(dtype));
    }
    let invalid = || Error::InvalidDims(raw.iter().map(|&d| d as usize).collect());
    if raw.iter().any(|&d| d == 0 || usize::try_from(d).is_err()) {
        return Err(invalid());
    }
    let expected = raw
        .iter()
        .try_fold(4u64, |acc, &d| acc.checked_mul(d))
        .ok_or_else(invalid)?;
    let actual = (bytes.len() - HEADER_LEN) as u64;
    if actual != expected {
        return Err(Error::PayloadLengthMismatch { expected, actual });
    }
    let dims = Dims::from([raw[0] as usize, raw[1] as usize, raw[2] as usize, raw[3] as usize]);
    let data = bytes[HEADER_LEN..]
        .chunks_exact(4)
        .map(|c| f32::from_le_bytes(c.try_into().unwrap()))
        .collect();
    Tensor::new(dims, data)
}

pub fn write_tensor(path: impl AsRef<Path>, t: &Tensor<f32>) -> Result<()> {
    let path = path.as_ref();
    fs::write(path, encode_tensor(t)).map_err(|e| Error::io(path, e))
}

/// Reads a tensor file. Non-finite payload values are returned as stored;
/// callers that need finite data check it themselves.
pub fn read_tensor(path: impl AsRef<Path>) -> Result<Tensor<f32>> {
    let path = path.as_ref();
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    decode_tensor(&bytes)
}
