//! MSB-first bit addressing over byte strings.

/// Reads `len` bits (at most 128) starting at bit `start`, MSB-first, and
/// returns them right-aligned in a `u128`.
pub(crate) fn read_bits(bytes: &[u8], start: usize, len: usize) -> u128 {
    debug_assert!(len <= 128);
    debug_assert!(start + len <= bytes.len() * 8);
    let mut out = 0u128;
    let mut pos = start;
    let end = start + len;
    // Bit-at-a-time up to a byte boundary, then whole bytes, then the tail.
    while pos < end && !pos.is_multiple_of(8) {
        out = (out << 1) | bit(bytes, pos) as u128;
        pos += 1;
    }
    while pos + 8 <= end {
        out = (out << 8) | bytes[pos / 8] as u128;
        pos += 8;
    }
    while pos < end {
        out = (out << 1) | bit(bytes, pos) as u128;
        pos += 1;
    }
    out
}

#[inline]
fn bit(bytes: &[u8], pos: usize) -> u8 {
    (bytes[pos / 8] >> (7 - pos % 8)) & 1
}

/// Leading `k` bits (k <= 64) of a byte string of at least 8 bytes.
#[inline]
pub(crate) fn leading_bits(bytes: &[u8], k: u32) -> u64 {
    let mut head = [0u8; 8];
    head.copy_from_slice(&bytes[..8]);
    let word = u64::from_be_bytes(head);
    if k == 64 {
        word
    } else {
        word >> (64 - k)
    }
}

/// Zeroes every bit at position >= `bits`.
pub(crate) fn mask_tail(bytes: &mut [u8], bits: usize) {
    let full = bits / 8;
    let rem = bits % 8;
    if full < bytes.len() {
        if rem > 0 {
            bytes[full] &= 0xffu8 << (8 - rem);
            for b in &mut bytes[full + 1..] {
                *b = 0;
            }
        } else {
            for b in &mut bytes[full..] {
                *b = 0;
            }
        }
    }
}
