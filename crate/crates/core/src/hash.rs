//! Random-oracle hash `H` and its unit-interval view.
//!
//! `H` is SHA-256. The unit-interval view of a digest reads its first eight
//! bytes as a big-endian `u64` and divides by 2^64, so every value is an exact
//! dyadic fraction in `[0, 1)`. [`UnitValue`] keeps the 64-bit numerator so
//! shard arithmetic never goes through floating point.

use num_traits::Float;
use sha2::{Digest as _, Sha256};

/// A 32-byte output of `H`.
pub type Digest = [u8; 32];

/// `H(bytes)`.
pub fn hash(bytes: &[u8]) -> Digest {
    Sha256::digest(bytes).into()
}

/// `H(p_1 ∘ p_2 ∘ … ∘ p_k)` without materialising the concatenation.
pub fn hash_concat(parts: &[&[u8]]) -> Digest {
    let mut hasher = Sha256::new();
    for part in parts {
        hasher.update(part);
    }
    hasher.finalize().into()
}

/// Reads the first eight bytes of a digest as a big-endian integer.
pub fn leading_u64(digest: &Digest) -> u64 {
    let mut word = [0u8; 8];
    word.copy_from_slice(&digest[..8]);
    u64::from_be_bytes(word)
}

/// An exact point `bits / 2^64` of the unit interval.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct UnitValue(u64);

impl UnitValue {
    pub const ZERO: UnitValue = UnitValue(0);

    pub const fn from_bits(bits: u64) -> Self {
        UnitValue(bits)
    }

    pub fn from_digest(digest: &Digest) -> Self {
        UnitValue(leading_u64(digest))
    }

    /// Numerator over the fixed denominator 2^64.
    pub const fn bits(self) -> u64 {
        self.0
    }

    /// Nearest floating-point value. For `f64` the top 2^10 numerators round
    /// up to `1.0`; use [`UnitValue::bits`] when exactness matters.
    pub fn to_float<F: Float>(self) -> F {
        let two_32 = F::from(4_294_967_296.0f64).expect("2^32 is representable");
        let hi = F::from(self.0 >> 32).expect("u32 is representable");
        let lo = F::from(self.0 & 0xffff_ffff).expect("u32 is representable");
        (hi + lo / two_32) / two_32
    }

    /// `⌈value · m⌉`, with the zero point assigned to bucket 1.
    ///
    /// Computed exactly: bucket `i` holds the half-open range `((i-1)/m, i/m]`.
    pub fn bucket(self, m: u32) -> u32 {
        assert!(m >= 1, "bucket count must be positive");
        let scaled = self.0 as u128 * m as u128;
        let ceil = ((scaled + (u64::MAX as u128)) >> 64) as u32;
        ceil.clamp(1, m)
    }
}

/// `.H(bytes)`: the unit-interval value of `H(bytes)`.
pub fn unit_hash(bytes: &[u8]) -> UnitValue {
    UnitValue::from_digest(&hash(bytes))
}

/// `⌈p · m⌉` clamped into `[1, m]` for a real-valued position `p ∈ (0, 1]`.
pub fn bucket_of_real<F: Float>(position: F, m: u32) -> u32 {
    assert!(m >= 1, "bucket count must be positive");
    let m_f = F::from(m).expect("shard count is representable");
    let ceil = (position * m_f).ceil();
    let idx = ceil.to_u64().unwrap_or(0);
    (idx.min(m as u64) as u32).max(1)
}
