use std::fmt;
use std::path::PathBuf;

use thiserror::Error;

/// NCHW axis names, used in shape errors.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Axis {
    N,
    C,
    H,
    W,
}

impl Axis {
    fn kind(self) -> &'static str {
        match self {
            Axis::N => "batch",
            Axis::C => "channel",
            Axis::H | Axis::W => "spatial",
        }
    }
}

impl fmt::Display for Axis {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Axis::N => "n",
            Axis::C => "c",
            Axis::H => "h",
            Axis::W => "w",
        })
    }
}

#[derive(Debug, Error)]
pub enum Error {
    #[error("{} mismatch on {axis}: {left} vs {right}", axis.kind())]
    ShapeMismatch { axis: Axis, left: usize, right: usize },

    #[error("{what} ({value}) is not divisible by {divisor}")]
    NotDivisible {
        what: &'static str,
        value: usize,
        divisor: usize,
    },

    #[error("invalid dimensions {0:?}: every dimension must be at least 1")]
    InvalidDims(Vec<usize>),

    #[error("data length {actual} does not match dimensions (expected {expected})")]
    LengthMismatch { expected: usize, actual: usize },

    #[error("index {index:?} out of bounds for dimensions {dims:?}")]
    IndexOutOfBounds { index: Vec<usize>, dims: Vec<usize> },

    #[error("empty range: lo ({lo}) must be below hi ({hi})")]
    EmptyRange { lo: f64, hi: f64 },

    #[error("invalid convolution spec: {0}")]
    InvalidSpec(String),

    #[error("nonpositive output size: input {input}, kernel {kernel}, dilation {dilation}, padding {padding}")]
    NonPositiveOutput {
        input: usize,
        kernel: usize,
        dilation: usize,
        padding: usize,
    },

    #[error("odd image dimensions {h}x{w}: the Haar transform needs even sizes")]
    OddDims { h: usize, w: usize },

    #[error("non-finite value at element {0}")]
    NonFinite(usize),

    #[error("bad magic: expected \"ICFT\"")]
    BadMagic,

    #[error("unsupported version {0} (expected 1)")]
    UnsupportedVersion(u32),

    #[error("unsupported rank {0} (expected 4)")]
    UnsupportedRank(u32),

    #[error("unsupported dtype {0} (expected 1 = f32)")]
    UnsupportedDtype(u8),

    #[error("truncated header: {0} bytes, expected 45")]
    TruncatedHeader(usize),

    #[error("payload length mismatch: expected {expected} bytes, found {actual}")]
    PayloadLengthMismatch { expected: u64, actual: u64 },

    #[error("unsupported format: {0}")]
    UnsupportedFormat(String),

    #[error("unsupported maxval {0} (expected 255)")]
    UnsupportedMaxval(u32),

    #[error("malformed image: {0}")]
    MalformedImage(String),

    #[error("config line {line}: {msg}")]
    Config { line: usize, msg: String },

    #[error("invalid config: {0}")]
    InvalidConfig(String),

    #[error("missing pyramid level {0}")]
    MissingLevel(u8),

    #[error("pyramid invariant violated: {0}")]
    Pyramid(String),

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn shape_message_names_axis() {
        let e = Error::ShapeMismatch {
            axis: Axis::H,
            left: 2,
            right: 3,
        };
        assert_eq!(e.to_string(), "spatial mismatch on h: 2 vs 3");
        let e = Error::ShapeMismatch {
            axis: Axis::C,
            left: 2,
            right: 3,
        };
        assert!(e.to_string().starts_with("channel mismatch on c"));
    }
}
