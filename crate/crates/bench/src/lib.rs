//! Shared fixtures for the criterion benches under `benches/`.

use h00t::tagcrypt::{seal_with, Hoot, PlainTag, TagMaterial, TagScheme};
use rand::SeedableRng;
use rand_chacha::ChaCha20Rng;

/// A reader's tag material plus hoots on its short tag: `own` open under the
/// reader's key, `cover` come from a colliding group and fail the MAC.
pub struct OpenFixture {
    pub reader: TagMaterial,
    pub own: Vec<Hoot>,
    pub cover: Vec<Hoot>,
}

pub fn open_fixture(k: u32, n: usize, message_len: usize) -> OpenFixture {
    let scheme = TagScheme::fast(k).expect("valid k");
    let reader = scheme.derive(&PlainTag::new("bench-reader").expect("valid tag"));
    let mut other = scheme.derive(&PlainTag::new("bench-cover").expect("valid tag"));
    other.short_tag = reader.short_tag;
    let mut rng = ChaCha20Rng::seed_from_u64(0);
    let msg = vec![b'm'; message_len];
    let mut make = |m: &TagMaterial| {
        (0..n)
            .map(|_| seal_with(&msg, std::slice::from_ref(m), &mut rng).expect("seal"))
            .collect::<Vec<_>>()
    };
    let own = make(&reader);
    let cover = make(&other);
    OpenFixture { reader, own, cover }
}
