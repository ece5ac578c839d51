//! Counter-based splitmix64 generator.
//!
//! Element `i` of a stream seeded with `s` is
//!
//! ```text
//! z  = s + (i + 1) * 0x9E3779B97F4A7C15          (wrapping u64)
//! z  = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9
//! z  = (z ^ (z >> 27)) * 0x94D049BB133111EB
//! z  =  z ^ (z >> 31)
//! u  = (z >> 40) / 2^24                           (in [0, 1))
//! v  = lo + (hi - lo) * u                         (computed in f64)
//! ```
//!
//! which is exactly the output of a sequential splitmix64 generator, but
//! random-access. `v` is rounded once to the element type; if rounding lands
//! on `hi` the next representable value below `hi` is used instead.

const GOLDEN: u64 = 0x9E37_79B9_7F4A_7C15;

/// Seed for reproducible generation.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default)]
pub struct Seed(pub u64);

impl Seed {
    /// Derive an independent stream seed for a named consumer.
    ///
    /// The label is hashed with 64-bit FNV-1a and the result is mixed with the
    /// parent seed through one splitmix64 round.
    pub fn derive(self, label: &str) -> Seed {
        Seed(mix(self.0 ^ fnv1a64(label.as_bytes())))
    }

    /// Raw 64-bit output at counter `i`.
    #[inline]
    pub fn word(self, i: u64) -> u64 {
        mix(self.0.wrapping_add(i.wrapping_add(1).wrapping_mul(GOLDEN)))
    }

    /// Uniform sample in `[0, 1)` with 24 bits of resolution.
    #[inline]
    pub fn unit(self, i: u64) -> f64 {
        (self.word(i) >> 40) as f64 / (1u64 << 24) as f64
    }
}

/// 64-bit FNV-1a, also used for output checksums.
pub fn fnv1a64(bytes: &[u8]) -> u64 {
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    for &b in bytes {
        h ^= b as u64;
        h = h.wrapping_mul(0x0000_0100_0000_01b3);
    }
    h
}

#[inline]
fn mix(mut z: u64) -> u64 {
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}
