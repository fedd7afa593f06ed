//! Text rendering of hoots.
//!
//! ```text
//! #<tag> [#<tag> ...] <payload>
//! ```
//!
//! Each short tag is written as `ceil(k/5)` glyphs of lowercase RFC 4648
//! base32 (`a-z`, `2-7`), most significant bits first, with any unused bits
//! of the last glyph set to zero. Tokens are separated by exactly one ASCII
//! space. The payload is unpadded standard Base64 (`A-Z a-z 0-9 + /`) over
//!
//! ```text
//! key_block[0] || ... || key_block[n-1] || mac (20 bytes) || ciphertext
//! ```
//!
//! where `n` is the number of hashtag tokens and every key block is 40
//! bytes. The whole line must fit the glyph budget (140 by default).

use std::fmt;

use base64::engine::general_purpose::STANDARD_NO_PAD;
use base64::Engine;
use rand::{CryptoRng, RngCore};
use thiserror::Error;

use crate::tagcrypt::{
    self, Hoot, KeyBlock, PlainTag, ShortTag, TagError, TagScheme, KEY_BLOCK_BYTES, MAC_BYTES,
};

pub const DEFAULT_GLYPH_BUDGET: usize = 140;
pub const MAC_BITS: usize = MAC_BYTES * 8;
pub const KEY_BLOCK_BITS: usize = KEY_BLOCK_BYTES * 8;

const BASE32: &[u8; 32] = b"abcdefghijklmnopqrstuvwxyz234567";

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum WireError {
    #[error("encoded hoot needs {glyphs} glyphs; budget is {budget}")]
    OverBudget { glyphs: usize, budget: usize },
    #[error("message is {len} bytes; capacity for {tags} tag(s) is {capacity}")]
    MessageTooLong {
        len: usize,
        tags: usize,
        capacity: usize,
    },
    #[error("no hashtag token")]
    NoTag,
    #[error("malformed hashtag token {0:?}")]
    MalformedTag(String),
    #[error("glyph {0:?} outside the payload alphabet")]
    BadGlyph(char),
    #[error("payload does not match {tags} tag(s): {detail}")]
    PayloadLength { tags: usize, detail: String },
    #[error("expected single-space separated tokens")]
    Layout,
    #[error("short tag width {found} does not match k={expected}")]
    TagWidth { found: u32, expected: u32 },
    #[error(transparent)]
    Tag(#[from] TagError),
}

/// Wire shape parameters. `k` must match the deployment's tag scheme.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct WireParams {
    pub k: u32,
    pub glyph_budget: usize,
}

impl WireParams {
    pub fn new(k: u32) -> Self {
        WireParams {
            k,
            glyph_budget: DEFAULT_GLYPH_BUDGET,
        }
    }

    pub fn with_budget(mut self, glyph_budget: usize) -> Self {
        self.glyph_budget = glyph_budget;
        self
    }

    pub fn tag_glyphs(&self) -> usize {
        (self.k as usize).div_ceil(5)
    }

    /// `#tag ` per tag; the last separator is the one before the payload.
    pub fn header_glyphs(&self, n_tags: usize) -> usize {
        n_tags * (self.tag_glyphs() + 2)
    }

    pub fn payload_bytes(n_tags: usize, message_len: usize) -> usize {
        n_tags * KEY_BLOCK_BYTES + MAC_BYTES + message_len
    }

    /// Exact glyph count of an encoded hoot.
    pub fn glyphs_for(&self, n_tags: usize, message_len: usize) -> usize {
        self.header_glyphs(n_tags) + base64_glyphs(Self::payload_bytes(n_tags, message_len))
    }

    pub fn fits(&self, n_tags: usize, message_len: usize) -> bool {
        self.glyphs_for(n_tags, message_len) <= self.glyph_budget
    }

    /// Largest message that fits, or `None` if not even an empty message
    /// fits with `n_tags` tags.
    pub fn try_capacity(&self, n_tags: usize) -> Option<usize> {
        let avail = self.glyph_budget.checked_sub(self.header_glyphs(n_tags))?;
        // ceil(8B/6) <= avail  <=>  B <= floor(6*avail/8)
        let max_payload = avail * 6 / 8;
        max_payload.checked_sub(Self::payload_bytes(n_tags, 0))
    }
}

/// Largest message (bytes) that encodes within budget; 0 when nothing fits.
pub fn capacity(params: &WireParams, n_tags: usize) -> usize {
    params.try_capacity(n_tags.max(1)).unwrap_or(0)
}

fn base64_glyphs(bytes: usize) -> usize {
    (bytes * 8).div_ceil(6)
}

/// A rendered hoot.
#[derive(Clone, PartialEq, Eq, Hash, Debug)]
pub struct WireMessage(String);

impl WireMessage {
    /// Wraps text without validating it; `parse` does that.
    pub fn from_text(text: impl Into<String>) -> Self {
        WireMessage(text.into())
    }

    pub fn as_str(&self) -> &str {
        &self.0
    }

    pub fn glyph_count(&self) -> usize {
        self.0.chars().count()
    }

    pub fn into_string(self) -> String {
        self.0
    }
}

impl fmt::Display for WireMessage {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

pub fn short_tag_to_base32(tag: ShortTag) -> String {
    let k = tag.k() as usize;
    let glyphs = k.div_ceil(5);
    let pad = glyphs * 5 - k;
    let v = (tag.value() as u128) << pad;
    (0..glyphs)
        .rev()
        .map(|i| BASE32[((v >> (5 * i)) & 31) as usize] as char)
        .collect()
}

/// Parses a base32 short tag of width `k`. Upper case is accepted so a tag
/// survives case folding by a search service.
pub fn short_tag_from_base32(text: &str, k: u32) -> Result<ShortTag, WireError> {
    let malformed = || WireError::MalformedTag(text.to_string());
    let glyphs = (k as usize).div_ceil(5);
    if text.len() != glyphs || !text.is_ascii() {
        return Err(malformed());
    }
    let mut v: u128 = 0;
    for c in text.bytes() {
        let d = match c.to_ascii_lowercase() {
            c @ b'a'..=b'z' => c - b'a',
            c @ b'2'..=b'7' => c - b'2' + 26,
            _ => return Err(malformed()),
        };
        v = (v << 5) | d as u128;
    }
    let pad = glyphs * 5 - k as usize;
    if v & ((1u128 << pad) - 1) != 0 {
        return Err(malformed());
    }
    Ok(ShortTag::new((v >> pad) as u64, k)?)
}

pub fn encode(hoot: &Hoot, params: &WireParams) -> Result<WireMessage, WireError> {
    for t in hoot.short_tags() {
        if t.k() != params.k {
            return Err(WireError::TagWidth {
                found: t.k(),
                expected: params.k,
            });
        }
    }
    let n = hoot.short_tags().len();
    let glyphs = params.glyphs_for(n, hoot.ciphertext().len());
    if glyphs > params.glyph_budget {
        return Err(WireError::OverBudget {
            glyphs,
            budget: params.glyph_budget,
        });
    }
    let mut payload = Vec::with_capacity(WireParams::payload_bytes(n, hoot.ciphertext().len()));
    for block in hoot.key_blocks() {
        payload.extend_from_slice(&block.0);
    }
    payload.extend_from_slice(hoot.mac());
    payload.extend_from_slice(hoot.ciphertext());

    let mut text = String::with_capacity(glyphs);
    for t in hoot.short_tags() {
        text.push('#');
        text.push_str(&short_tag_to_base32(*t));
        text.push(' ');
    }
    STANDARD_NO_PAD.encode_string(&payload, &mut text);
    debug_assert_eq!(text.len(), glyphs);
    Ok(WireMessage(text))
}

pub fn parse(text: &str, params: &WireParams) -> Result<Hoot, WireError> {
    let glyphs = text.chars().count();
    if glyphs > params.glyph_budget {
        return Err(WireError::OverBudget {
            glyphs,
            budget: params.glyph_budget,
        });
    }
    let mut tokens: Vec<&str> = text.split(' ').collect();
    let payload = tokens.pop().unwrap_or_default();
    if tokens.is_empty() {
        return Err(if payload.starts_with('#') {
            WireError::Layout
        } else {
            WireError::NoTag
        });
    }
    if payload.is_empty() || payload.starts_with('#') {
        return Err(WireError::Layout);
    }

    let short_tags = tokens
        .iter()
        .map(|tok| match tok.strip_prefix('#') {
            Some(body) => short_tag_from_base32(body, params.k),
            None if tok.is_empty() => Err(WireError::Layout),
            None => Err(WireError::MalformedTag(tok.to_string())),
        })
        .collect::<Result<Vec<_>, _>>()?;
    let n = short_tags.len();

    if let Some(c) = payload
        .chars()
        .find(|c| !(c.is_ascii_alphanumeric() || *c == '+' || *c == '/'))
    {
        return Err(WireError::BadGlyph(c));
    }
    let bytes = STANDARD_NO_PAD
        .decode(payload)
        .map_err(|e| WireError::PayloadLength {
            tags: n,
            detail: e.to_string(),
        })?;
    let fixed = WireParams::payload_bytes(n, 0);
    if bytes.len() < fixed {
        return Err(WireError::PayloadLength {
            tags: n,
            detail: format!("{} bytes, at least {fixed} needed", bytes.len()),
        });
    }

    let (blocks, rest) = bytes.split_at(n * KEY_BLOCK_BYTES);
    let key_blocks = blocks
        .chunks_exact(KEY_BLOCK_BYTES)
        .map(|c| KeyBlock(c.try_into().expect("exact chunk")))
        .collect();
    let (mac, ciphertext) = rest.split_at(MAC_BYTES);
    Ok(Hoot::from_parts(
        short_tags,
        key_blocks,
        mac.try_into().expect("20 bytes"),
        ciphertext.to_vec(),
    )?)
}

/// Seals and encodes in one step, refusing messages over capacity.
pub fn seal_to_wire<R: RngCore + CryptoRng>(
    message: &[u8],
    plain_tags: &[PlainTag],
    scheme: &TagScheme,
    params: &WireParams,
    rng: &mut R,
) -> Result<WireMessage, WireError> {
    if plain_tags.is_empty() {
        return Err(TagError::NoTags.into());
    }
    if !params.fits(plain_tags.len(), message.len()) {
        return Err(WireError::MessageTooLong {
            len: message.len(),
            tags: plain_tags.len(),
            capacity: capacity(params, plain_tags.len()),
        });
    }
    let hoot = tagcrypt::seal(message, plain_tags, scheme, rng)?;
    encode(&hoot, params)
}
