//! Long-tag derivation.
//!
//! Two modes are supported. `FastHash` is a single SHA-1 digest of the plain
//! tag's UTF-8 bytes, which is what makes the collider and the reader cheap.
//! `MemoryHard` runs scrypt over the plain tag with a fixed protocol salt; it
//! makes every guess by a brute-force attacker (and every collider candidate)
//! cost tens of megabytes and about a tenth of a second.
//!
//! When more bits are requested than one SHA-1 digest holds, the digest seeds
//! a ChaCha20 stream and the long tag continues with that stream's output.

use rand::RngCore;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha20Rng;
use serde::{Deserialize, Serialize};
use sha1::{Digest, Sha1};

use super::bits::mask_tail;
use super::TagError;

/// Bits in one SHA-1 digest.
pub const SHA1_BITS: u32 = 160;

/// Salt shared by every memory-hard derivation. Plain tags are the only
/// secret, so the salt is a public protocol constant.
pub const MEMORY_HARD_SALT: &[u8] = b"#h00t long tag v1";

/// scrypt cost parameters.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ScryptCost {
    /// log2 of the work factor N.
    pub log_n: u8,
    /// Block size r; memory use is 128 * r * N bytes.
    pub r: u32,
    /// Parallelism p.
    pub p: u32,
}

impl Default for ScryptCost {
    fn default() -> Self {
        ScryptCost {
            log_n: 15,
            r: 8,
            p: 1,
        }
    }
}

impl ScryptCost {
    pub fn memory_bytes(&self) -> u64 {
        128 * self.r as u64 * (1u64 << self.log_n)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "mode", rename_all = "kebab-case")]
pub enum KdfMode {
    FastHash,
    MemoryHard(ScryptCost),
}

/// How a plain tag becomes a long tag.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct KdfConfig {
    pub mode: KdfMode,
    /// Length of the long tag in bits.
    pub output_bits: u32,
    /// Allow fast-hash mode to stretch past 160 bits with a seeded stream.
    pub expand: bool,
}

impl KdfConfig {
    /// One SHA-1 digest, 160 bits.
    pub const fn fast_hash() -> Self {
        KdfConfig {
            mode: KdfMode::FastHash,
            output_bits: SHA1_BITS,
            expand: true,
        }
    }

    pub fn memory_hard(cost: ScryptCost) -> Self {
        KdfConfig {
            mode: KdfMode::MemoryHard(cost),
            output_bits: SHA1_BITS,
            expand: true,
        }
    }

    /// Widens `output_bits` to at least `k + 128`.
    pub fn sized_for(mut self, k: u32) -> Self {
        self.output_bits = self.output_bits.max(k + super::TAG_KEY_BITS);
        self
    }

    pub fn is_memory_hard(&self) -> bool {
        matches!(self.mode, KdfMode::MemoryHard(_))
    }

    pub fn validate(&self) -> Result<(), TagError> {
        if self.output_bits == 0 {
            return Err(TagError::InvalidConfig(
                "output bits must be positive".into(),
            ));
        }
        match self.mode {
            KdfMode::FastHash => {
                if self.output_bits > SHA1_BITS && !self.expand {
                    return Err(TagError::InvalidConfig(format!(
                        "fast-hash yields {SHA1_BITS} bits; {} requested with expansion disabled",
                        self.output_bits
                    )));
                }
            }
            KdfMode::MemoryHard(cost) => {
                if !(1..64).contains(&cost.log_n) || cost.r == 0 || cost.p == 0 {
                    return Err(TagError::InvalidConfig(format!(
                        "bad scrypt parameters {cost:?}"
                    )));
                }
                // scrypt's own output limit is far above anything useful here.
                if self.output_bits > 8 * 1024 {
                    return Err(TagError::InvalidConfig("output bits too large".into()));
                }
            }
        }
        Ok(())
    }

    /// Derives `output_bits` of long tag from raw bytes. Callers validate the
    /// config once up front.
    pub(crate) fn derive_bytes(&self, input: &[u8]) -> Vec<u8> {
        let n_bytes = (self.output_bits as usize).div_ceil(8);
        let mut out = match self.mode {
            KdfMode::FastHash => {
                let digest: [u8; 20] = Sha1::digest(input).into();
                let mut out = digest.to_vec();
                if n_bytes > out.len() {
                    out.resize(n_bytes, 0);
                    expand_from_digest(&digest, &mut out[20..]);
                } else {
                    out.truncate(n_bytes);
                }
                out
            }
            KdfMode::MemoryHard(cost) => {
                let params = scrypt::Params::new(cost.log_n, cost.r, cost.p, n_bytes)
                    .expect("validated scrypt parameters");
                let mut out = vec![0u8; n_bytes];
                scrypt::scrypt(input, MEMORY_HARD_SALT, &params, &mut out)
                    .expect("output length accepted by scrypt");
                out
            }
        };
        mask_tail(&mut out, self.output_bits as usize);
        out
    }
}

impl Default for KdfConfig {
    fn default() -> Self {
        KdfConfig::memory_hard(ScryptCost::default())
    }
}

fn expand_from_digest(digest: &[u8; 20], out: &mut [u8]) {
    let mut seed = [0u8; 32];
    seed[..20].copy_from_slice(digest);
    ChaCha20Rng::from_seed(seed).fill_bytes(out);
}
