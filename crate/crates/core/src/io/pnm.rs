//! Binary PGM (P5) and PPM (P6) input with maxval 255.

use std::fs;
use std::path::Path;

use crate::error::{Error, Result};
use crate::wavelet::{luminance, GrayImage};

/// Decoded 8-bit image, one or three interleaved channels.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PnmImage {
    pub width: usize,
    pub height: usize,
    pub channels: usize,
    pub data: Vec<u8>,
}

impl PnmImage {
    /// Pixels scaled to `[0, 1]`, colour reduced to luminance.
    pub fn to_gray(&self) -> Vec<f64> {
        let s = |v: u8| v as f64 / 255.0;
        match self.channels {
            1 => self.data.iter().map(|&v| s(v)).collect(),
            _ => self
                .data
                .chunks_exact(3)
                .map(|p| luminance(s(p[0]), s(p[1]), s(p[2])))
                .collect(),
        }
    }

    /// Gray image padded to even size.
    pub fn to_gray_image(&self) -> Result<GrayImage<f64>> {
        GrayImage::from_padded(self.height, self.width, self.to_gray())
    }
}

struct Header<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl Header<'_> {
    fn skip_space(&mut self) {
        while let Some(&b) = self.bytes.get(self.pos) {
            if b == b'#' {
                while self.bytes.get(self.pos).is_some_and(|&b| b != b'\n') {
                    self.pos += 1;
                }
            } else if b.is_ascii_whitespace() {
                self.pos += 1;
            } else {
                break;
            }
        }
    }

    fn number(&mut self, what: &str) -> Result<u32> {
        self.skip_space();
        let start = self.pos;
        while self.bytes.get(self.pos).is_some_and(u8::is_ascii_digit) {
            self.pos += 1;
        }
        std::str::from_utf8(&self.bytes[start..self.pos])
            .ok()
            .and_then(|s| s.parse().ok())
            .ok_or_else(|| Error::MalformedImage(format!("bad {what}")))
    }
}

pub fn decode_pnm(bytes: &[u8]) -> Result<PnmImage> {
    let magic = bytes.get(..2).unwrap_or(bytes);
    let channels = match magic {
        b"P5" => 1,
        b"P6" => 3,
        _ => {
            let shown = String::from_utf8_lossy(magic).into_owned();
            return Err(Error::UnsupportedFormat(format!(
                "{shown:?} (only binary P5 and P6 are read)"
            )));
        }
    };
    let mut h = Header { bytes, pos: 2 };
    let width = h.number("width")? as usize;
    let height = h.number("height")? as usize;
    let maxval = h.number("maxval")?;
    if width == 0 || height == 0 {
        return Err(Error::MalformedImage(format!("empty image {width}x{height}")));
    }
    if maxval != 255 {
        return Err(Error::UnsupportedMaxval(maxval));
    }
    if !bytes.get(h.pos).is_some_and(u8::is_ascii_whitespace) {
        return Err(Error::MalformedImage("missing whitespace after maxval".into()));
    }
    let raster = &bytes[h.pos + 1..];
    let need = width * height * channels;
    if raster.len() < need {
        return Err(Error::MalformedImage(format!(
            "raster has {} bytes, expected {need}",
            raster.len()
        )));
    }
    Ok(PnmImage {
        width,
        height,
        channels,
        data: raster[..need].to_vec(),
    })
}

pub fn encode_pnm(img: &PnmImage) -> Vec<u8> {
    let magic = if img.channels == 1 { "P5" } else { "P6" };
    let mut out = format!("{magic}\n{} {}\n255\n", img.width, img.height).into_bytes();
    out.extend_from_slice(&img.data);
    out
}

pub fn read_pnm(path: impl AsRef<Path>) -> Result<PnmImage> {
    let path = path.as_ref();
    decode_pnm(&fs::read(path).map_err(|e| Error::io(path, e))?)
}

/// Reads a PGM or PPM file as a gray image in `[0, 1]`.
pub fn read_image(path: impl AsRef<Path>) -> Result<GrayImage<f64>> {
    read_pnm(path)?.to_gray_image()
}

pub fn write_pnm(path: impl AsRef<Path>, img: &PnmImage) -> Result<()> {
    let path = path.as_ref();
    fs::write(path, encode_pnm(img)).map_err(|e| Error::io(path, e))
}
