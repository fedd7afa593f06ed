//! Tags, keys and hoots.
//!
//! A group is identified by its plain tag, a secret hashtag. The plain tag is
//! stretched into a long tag; the first `k` bits of the long tag are the short
//! tag that is published as a searchable hashtag, and the next 128 bits are the
//! tag key. Each hoot carries fresh random session keys, `k_enc` and `k_mac`,
//! wrapped once per addressed group under that group's tag key. The message is
//! AES-128-CTR encrypted under `k_enc` (initial counter 0) and authenticated
//! with HMAC-SHA1 under `k_mac` over the ciphertext.
//!
//! A key block is 40 bytes: an 8-byte random nonce followed by the 32-byte
//! CTR encryption of `k_enc || k_mac` under the tag key, with the counter
//! block initialised to `nonce || 0u64`. The nonce keeps two hoots from the
//! same group from sharing a keystream.

mod bits;
mod kdf;

use std::fmt;
use std::str::FromStr;

use aes::cipher::{KeyIvInit, StreamCipher};
use hmac::{Hmac, Mac};
use rand::{CryptoRng, RngCore};
use sha1::Sha1;
use thiserror::Error;

pub use kdf::{KdfConfig, KdfMode, ScryptCost, MEMORY_HARD_SALT, SHA1_BITS};

type Aes128Ctr = ctr::Ctr128BE<aes::Aes128>;
type HmacSha1 = Hmac<Sha1>;

pub const TAG_KEY_BITS: u32 = 128;
pub const MIN_K: u32 = 6;
/// Narrowest short tag the collider and analyses accept.
pub const MIN_SEARCH_K: u32 = 1;
pub const MAX_K: u32 = 64;
pub const DEFAULT_K: u32 = 24;
pub const MAX_PLAIN_TAG_BYTES: usize = 256;

pub const SESSION_KEY_BYTES: usize = 16;
pub const KEY_BLOCK_NONCE_BYTES: usize = 8;
pub const KEY_BLOCK_BYTES: usize = KEY_BLOCK_NONCE_BYTES + 2 * SESSION_KEY_BYTES;
pub const MAC_BYTES: usize = 20;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum TagError {
    #[error("plain tag is empty")]
    EmptyPlainTag,
    #[error("plain tag contains whitespace")]
    WhitespaceInPlainTag,
    #[error("plain tag is {0} bytes; at most {MAX_PLAIN_TAG_BYTES} allowed")]
    PlainTagTooLong(usize),
    #[error("short tag width k={0} outside the supported range")]
    BadTagWidth(u32),
    #[error("short tag value {value:#x} does not fit in {k} bits")]
    ShortTagOverflow { value: u64, k: u32 },
    #[error("long tag has {have} bits, {need} needed")]
    InsufficientBits { have: u32, need: u32 },
    #[error("invalid KDF config: {0}")]
    InvalidConfig(String),
    #[error("a hoot needs at least one plain tag")]
    NoTags,
    #[error("hoot has {tags} short tags but {blocks} key blocks")]
    BlockCountMismatch { tags: usize, blocks: usize },
    #[error("short tags in one hoot must share a width")]
    MixedTagWidths,
}

/// The secret hashtag a group shares, without the leading `#`.
#[derive(Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct PlainTag(String);

impl PlainTag {
    pub fn new(text: impl Into<String>) -> Result<Self, TagError> {
        let text = text.into();
        if text.is_empty() {
            return Err(TagError::EmptyPlainTag);
        }
        if text.chars().any(char::is_whitespace) {
            return Err(TagError::WhitespaceInPlainTag);
        }
        if text.len() > MAX_PLAIN_TAG_BYTES {
            return Err(TagError::PlainTagTooLong(text.len()));
        }
        Ok(PlainTag(text))
    }

    pub fn as_str(&self) -> &str {
        &self.0
    }

    pub fn as_bytes(&self) -> &[u8] {
        self.0.as_bytes()
    }
}

impl FromStr for PlainTag {
    type Err = TagError;

    /// Accepts an optional leading `#`.
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        PlainTag::new(s.strip_prefix('#').unwrap_or(s))
    }
}

impl fmt::Display for PlainTag {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

// Plain tags are secrets; keep them out of debug logs.
impl fmt::Debug for PlainTag {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "PlainTag(<{} bytes>)", self.0.len())
    }
}

/// KDF output, MSB-first.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct LongTag {
    bytes: Vec<u8>,
    bits: u32,
}

impl LongTag {
    /// Wraps raw bytes; bits past `bits` are cleared.
    pub fn from_bytes(mut bytes: Vec<u8>, bits: u32) -> Self {
        assert!(
            bytes.len() * 8 >= bits as usize,
            "not enough bytes for {bits} bits"
        );
        bytes.truncate((bits as usize).div_ceil(8));
        bits::mask_tail(&mut bytes, bits as usize);
        LongTag { bytes, bits }
    }

    pub fn bits(&self) -> u32 {
        self.bits
    }

    pub fn as_bytes(&self) -> &[u8] {
        &self.bytes
    }

    /// Returns a copy with bit `i` inverted.
    pub fn with_bit_flipped(&self, i: u32) -> LongTag {
        assert!(i < self.bits);
        let mut bytes = self.bytes.clone();
        bytes[i as usize / 8] ^= 0x80 >> (i % 8);
        LongTag {
            bytes,
            bits: self.bits,
        }
    }
}

/// The public, deliberately collision-prone group identifier: the leading
/// `k` bits of a long tag, right-aligned in `value`.
#[derive(Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Debug)]
pub struct ShortTag {
    value: u64,
    k: u8,
}

impl ShortTag {
    pub fn new(value: u64, k: u32) -> Result<Self, TagError> {
        check_width(k)?;
        if k < 64 && value >> k != 0 {
            return Err(TagError::ShortTagOverflow { value, k });
        }
        Ok(ShortTag { value, k: k as u8 })
    }

    pub fn value(&self) -> u64 {
        self.value
    }

    pub fn k(&self) -> u32 {
        self.k as u32
    }
}

impl fmt::Display for ShortTag {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&crate::wire::short_tag_to_base32(*self))
    }
}

fn check_width(k: u32) -> Result<(), TagError> {
    if (MIN_SEARCH_K..=MAX_K).contains(&k) {
        Ok(())
    } else {
        Err(TagError::BadTagWidth(k))
    }
}

fn check_k(k: u32) -> Result<(), TagError> {
    if (MIN_K..=MAX_K).contains(&k) {
        Ok(())
    } else {
        Err(TagError::BadTagWidth(k))
    }
}

/// Short tag plus the tag key that wraps session keys for the group.
#[derive(Clone, PartialEq, Eq)]
pub struct TagMaterial {
    pub short_tag: ShortTag,
    pub tag_key: [u8; 16],
}

impl fmt::Debug for TagMaterial {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("TagMaterial")
            .field("short_tag", &self.short_tag)
            .finish_non_exhaustive()
    }
}

/// Per-hoot random keys.
#[derive(Clone, PartialEq, Eq)]
pub struct SessionKeys {
    pub enc: [u8; SESSION_KEY_BYTES],
    pub mac: [u8; SESSION_KEY_BYTES],
}

impl SessionKeys {
    pub fn generate<R: RngCore + CryptoRng>(rng: &mut R) -> Self {
        let mut keys = SessionKeys {
            enc: [0; SESSION_KEY_BYTES],
            mac: [0; SESSION_KEY_BYTES],
        };
        rng.fill_bytes(&mut keys.enc);
        rng.fill_bytes(&mut keys.mac);
        keys
    }

    fn to_block(&self) -> [u8; 2 * SESSION_KEY_BYTES] {
        let mut out = [0u8; 2 * SESSION_KEY_BYTES];
        out[..SESSION_KEY_BYTES].copy_from_slice(&self.enc);
        out[SESSION_KEY_BYTES..].copy_from_slice(&self.mac);
        out
    }

    fn from_block(block: &[u8; 2 * SESSION_KEY_BYTES]) -> Self {
        let mut keys = SessionKeys {
            enc: [0; SESSION_KEY_BYTES],
            mac: [0; SESSION_KEY_BYTES],
        };
        keys.enc.copy_from_slice(&block[..SESSION_KEY_BYTES]);
        keys.mac.copy_from_slice(&block[SESSION_KEY_BYTES..]);
        keys
    }
}

impl fmt::Debug for SessionKeys {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str("SessionKeys(..)")
    }
}

/// `nonce || CTR(tag_key, nonce||0, k_enc || k_mac)`.
#[derive(Clone, Copy, PartialEq, Eq, Hash, Debug)]
pub struct KeyBlock(pub [u8; KEY_BLOCK_BYTES]);

impl KeyBlock {
    fn wrap(tag_key: &[u8; 16], nonce: [u8; KEY_BLOCK_NONCE_BYTES], keys: &SessionKeys) -> Self {
        let mut block = [0u8; KEY_BLOCK_BYTES];
        block[..KEY_BLOCK_NONCE_BYTES].copy_from_slice(&nonce);
        let mut body = keys.to_block();
        key_block_cipher(tag_key, &nonce).apply_keystream(&mut body);
        block[KEY_BLOCK_NONCE_BYTES..].copy_from_slice(&body);
        KeyBlock(block)
    }

    fn unwrap(&self, tag_key: &[u8; 16]) -> SessionKeys {
        let mut nonce = [0u8; KEY_BLOCK_NONCE_BYTES];
        nonce.copy_from_slice(&self.0[..KEY_BLOCK_NONCE_BYTES]);
        let mut body = [0u8; 2 * SESSION_KEY_BYTES];
        body.copy_from_slice(&self.0[KEY_BLOCK_NONCE_BYTES..]);
        key_block_cipher(tag_key, &nonce).apply_keystream(&mut body);
        SessionKeys::from_block(&body)
    }
}

fn key_block_cipher(tag_key: &[u8; 16], nonce: &[u8; KEY_BLOCK_NONCE_BYTES]) -> Aes128Ctr {
    let mut iv = [0u8; 16];
    iv[..KEY_BLOCK_NONCE_BYTES].copy_from_slice(nonce);
    Aes128Ctr::new(tag_key.into(), &iv.into())
}

fn message_cipher(k_enc: &[u8; 16]) -> Aes128Ctr {
    Aes128Ctr::new(k_enc.into(), &[0u8; 16].into())
}

fn mac_over(k_mac: &[u8; 16], ciphertext: &[u8]) -> HmacSha1 {
    let mut mac = <HmacSha1 as Mac>::new_from_slice(k_mac).expect("HMAC takes any key length");
    mac.update(ciphertext);
    mac
}

/// One protocol message: short tag(s), wrapped session keys, MAC, ciphertext.
#[derive(Clone, PartialEq, Eq, Debug)]
pub struct Hoot {
    short_tags: Vec<ShortTag>,
    key_blocks: Vec<KeyBlock>,
    mac: [u8; MAC_BYTES],
    ciphertext: Vec<u8>,
}

impl Hoot {
    pub fn from_parts(
        short_tags: Vec<ShortTag>,
        key_blocks: Vec<KeyBlock>,
        mac: [u8; MAC_BYTES],
        ciphertext: Vec<u8>,
    ) -> Result<Self, TagError> {
        if short_tags.is_empty() {
            return Err(TagError::NoTags);
        }
        if short_tags.len() != key_blocks.len() {
            return Err(TagError::BlockCountMismatch {
                tags: short_tags.len(),
                blocks: key_blocks.len(),
            });
        }
        if short_tags.iter().any(|t| t.k != short_tags[0].k) {
            return Err(TagError::MixedTagWidths);
        }
        Ok(Hoot {
            short_tags,
            key_blocks,
            mac,
            ciphertext,
        })
    }

    pub fn short_tags(&self) -> &[ShortTag] {
        &self.short_tags
    }

    pub fn key_blocks(&self) -> &[KeyBlock] {
        &self.key_blocks
    }

    pub fn mac(&self) -> &[u8; MAC_BYTES] {
        &self.mac
    }

    pub fn ciphertext(&self) -> &[u8] {
        &self.ciphertext
    }

    pub fn ciphertext_mut(&mut self) -> &mut Vec<u8> {
        &mut self.ciphertext
    }

    pub fn mac_mut(&mut self) -> &mut [u8; MAC_BYTES] {
        &mut self.mac
    }

    pub fn key_blocks_mut(&mut self) -> &mut [KeyBlock] {
        &mut self.key_blocks
    }
}

/// Plain tag to long tag.
pub fn derive_long_tag(plain_tag: &PlainTag, cfg: &KdfConfig) -> Result<LongTag, TagError> {
    cfg.validate()?;
    Ok(LongTag {
        bytes: cfg.derive_bytes(plain_tag.as_bytes()),
        bits: cfg.output_bits,
    })
}

/// Slices a long tag into the short tag (bits `0..k`) and the tag key
/// (bits `k..k+128`).
pub fn split_tag(long_tag: &LongTag, k: u32) -> Result<TagMaterial, TagError> {
    check_width(k)?;
    let need = k + TAG_KEY_BITS;
    if long_tag.bits < need {
        return Err(TagError::InsufficientBits {
            have: long_tag.bits,
            need,
        });
    }
    let short = bits::read_bits(&long_tag.bytes, 0, k as usize) as u64;
    let key = bits::read_bits(&long_tag.bytes, k as usize, TAG_KEY_BITS as usize);
    Ok(TagMaterial {
        short_tag: ShortTag {
            value: short,
            k: k as u8,
        },
        tag_key: key.to_be_bytes(),
    })
}

/// Protocol-wide parameters: the short-tag width and the KDF.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct TagScheme {
    k: u32,
    kdf: KdfConfig,
}

impl TagScheme {
    pub fn new(k: u32, kdf: KdfConfig) -> Result<Self, TagError> {
        check_k(k)?;
        Self::build(k, kdf)
    }

    /// Like [`TagScheme::new`] but accepts widths below the protocol
    /// minimum, for collider experiments and analyses on tiny spaces.
    pub fn for_search(k: u32, kdf: KdfConfig) -> Result<Self, TagError> {
        check_width(k)?;
        Self::build(k, kdf)
    }

    fn build(k: u32, kdf: KdfConfig) -> Result<Self, TagError> {
        kdf.validate()?;
        if kdf.output_bits < k + TAG_KEY_BITS {
            return Err(TagError::InvalidConfig(format!(
                "long tag of {} bits cannot hold a {k}-bit short tag and a 128-bit tag key",
                kdf.output_bits
            )));
        }
        Ok(TagScheme { k, kdf })
    }

    /// Fast-hash scheme sized for `k`.
    pub fn fast(k: u32) -> Result<Self, TagError> {
        TagScheme::new(k, KdfConfig::fast_hash().sized_for(k))
    }

    pub fn k(&self) -> u32 {
        self.k
    }

    pub fn kdf(&self) -> &KdfConfig {
        &self.kdf
    }

    pub fn derive(&self, plain_tag: &PlainTag) -> TagMaterial {
        self.derive_raw(plain_tag.as_bytes())
    }

    /// Derivation over arbitrary bytes; used where inputs are not validated
    /// plain tags (corpus hashtags, collider candidates).
    pub fn derive_raw(&self, input: &[u8]) -> TagMaterial {
        let long = LongTag {
            bytes: self.kdf.derive_bytes(input),
            bits: self.kdf.output_bits,
        };
        split_tag(&long, self.k).expect("scheme validated at construction")
    }

    pub fn short_tag(&self, plain_tag: &PlainTag) -> ShortTag {
        self.short_tag_raw(plain_tag.as_bytes())
    }

    /// Short tag only. In fast-hash mode this is one SHA-1 and a shift.
    pub fn short_tag_raw(&self, input: &[u8]) -> ShortTag {
        let value = match self.kdf.mode {
            KdfMode::FastHash => {
                use sha1::Digest;
                let digest = Sha1::digest(input);
                bits::leading_bits(&digest, self.k)
            }
            KdfMode::MemoryHard(_) => return self.derive_raw(input).short_tag,
        };
        ShortTag {
            value,
            k: self.k as u8,
        }
    }
}

impl TagMaterial {
    /// Unwraps the session keys from the first key block addressed to this
    /// short tag whose MAC verifies. This is the reader's cheap rejection
    /// path: no message decryption happens here.
    pub fn recover_keys(&self, hoot: &Hoot) -> Option<SessionKeys> {
        hoot.short_tags
            .iter()
            .zip(&hoot.key_blocks)
            .filter(|(tag, _)| **tag == self.short_tag)
            .map(|(_, block)| block.unwrap(&self.tag_key))
            .find(|keys| {
                mac_over(&keys.mac, &hoot.ciphertext)
                    .verify_slice(&hoot.mac)
                    .is_ok()
            })
    }

    /// Decrypts the hoot if it was sealed for this group.
    pub fn open(&self, hoot: &Hoot) -> Option<Vec<u8>> {
        let keys = self.recover_keys(hoot)?;
        let mut message = hoot.ciphertext.clone();
        message_cipher(&keys.enc).apply_keystream(&mut message);
        Some(message)
    }
}

/// Seals `message` for every group in `plain_tags`.
pub fn seal<R: RngCore + CryptoRng>(
    message: &[u8],
    plain_tags: &[PlainTag],
    scheme: &TagScheme,
    rng: &mut R,
) -> Result<Hoot, TagError> {
    let materials: Vec<TagMaterial> = plain_tags.iter().map(|t| scheme.derive(t)).collect();
    seal_with(message, &materials, rng)
}

/// Seals with already-derived tag material.
pub fn seal_with<R: RngCore + CryptoRng>(
    message: &[u8],
    recipients: &[TagMaterial],
    rng: &mut R,
) -> Result<Hoot, TagError> {
    let keys = SessionKeys::generate(rng);
    seal_with_keys(message, recipients, &keys, rng)
}

pub(crate) fn seal_with_keys<R: RngCore + CryptoRng>(
    message: &[u8],
    recipients: &[TagMaterial],
    keys: &SessionKeys,
    rng: &mut R,
) -> Result<Hoot, TagError> {
    if recipients.is_empty() {
        return Err(TagError::NoTags);
    }
    let mut ciphertext = message.to_vec();
    message_cipher(&keys.enc).apply_keystream(&mut ciphertext);
    let mac: [u8; MAC_BYTES] = mac_over(&keys.mac, &ciphertext)
        .finalize()
        .into_bytes()
        .into();
    let key_blocks = recipients
        .iter()
        .map(|m| {
            let mut nonce = [0u8; KEY_BLOCK_NONCE_BYTES];
            rng.fill_bytes(&mut nonce);
            KeyBlock::wrap(&m.tag_key, nonce, keys)
        })
        .collect();
    Hoot::from_parts(
        recipients.iter().map(|m| m.short_tag).collect(),
        key_blocks,
        mac,
        ciphertext,
    )
}

/// Opens `hoot` with `plain_tag`; `None` means the hoot belongs to some
/// other group (or was tampered with).
pub fn open(hoot: &Hoot, plain_tag: &PlainTag, scheme: &TagScheme) -> Option<Vec<u8>> {
    scheme.derive(plain_tag).open(hoot)
}
