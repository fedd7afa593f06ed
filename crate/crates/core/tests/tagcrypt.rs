use h00t::collider::{find_tag, Alphabet, SearchMode, SearchSpec, Target};
use h00t::tagcrypt::{self, ScryptCost};
use h00t::{derive_long_tag, open, seal, split_tag, KdfConfig, PlainTag, TagScheme};
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha20Rng;

fn hex(bytes: &[u8]) -> String {
    bytes.iter().map(|b| format!("{b:02x}")).collect()
}

fn tag(s: &str) -> PlainTag {
    PlainTag::new(s).unwrap()
}

// Reference digests from Python's hashlib.
#[test]
fn fast_hash_long_tag_is_sha1() {
    let cfg = KdfConfig::fast_hash();
    let lt = derive_long_tag(&tag("abc"), &cfg).unwrap();
    assert_eq!(lt.bits(), 160);
    assert_eq!(
        hex(lt.as_bytes()),
        "a9993e364706816aba3e25717850c26c9cd0d89d"
    );
    let lt = derive_long_tag(
        &tag("abcdbcdecdefdefgefghfghighijhijkijkljklmklmnlmnomnopnopq"),
        &cfg,
    )
    .unwrap();
    assert_eq!(
        hex(lt.as_bytes()),
        "84983e441c3bd26ebaae4aa1f95129e5e54670f1"
    );
}

#[test]
fn fast_hash_short_tag_is_leading_bits() {
    let scheme = TagScheme::fast(24).unwrap();
    assert_eq!(scheme.short_tag(&tag("abc")).value(), 0xa9993e);
    let mat = scheme.derive(&tag("abc"));
    assert_eq!(mat.short_tag.value(), 0xa9993e);
    assert_eq!(hex(&mat.tag_key), "364706816aba3e25717850c26c9cd0d8");
    let s12 = TagScheme::fast(12).unwrap();
    assert_eq!(s12.short_tag(&tag("abc")).value(), 0xa99);
}

#[test]
fn memory_hard_long_tag_matches_scrypt_reference() {
    // hashlib.scrypt(b"abc", salt=b"#h00t long tag v1", n=2**14, r=8, p=1, dklen=20)
    let cfg = KdfConfig::memory_hard(ScryptCost {
        log_n: 14,
        r: 8,
        p: 1,
    });
    let lt = derive_long_tag(&tag("abc"), &cfg).unwrap();
    assert_eq!(lt.bits(), 160);
    assert_eq!(
        hex(lt.as_bytes()),
        "875cda02576a9081d22b7e36a3b6b29f08ae2a2e"
    );
}

#[test]
#[ignore = "default cost takes 32 MiB and ~0.1 s per derivation"]
fn memory_hard_default_cost_reference() {
    let lt = derive_long_tag(&tag("abc"), &KdfConfig::default()).unwrap();
    assert_eq!(
        hex(lt.as_bytes()),
        "f40ea576248083fd5c5fab54b743f62401663452"
    );
}

#[test]
fn memory_hard_and_fast_differ() {
    let cheap = KdfConfig::memory_hard(ScryptCost {
        log_n: 4,
        r: 8,
        p: 1,
    });
    let a = derive_long_tag(&tag("abc"), &cheap).unwrap();
    let b = derive_long_tag(&tag("abc"), &KdfConfig::fast_hash()).unwrap();
    assert_ne!(a, b);
    assert_eq!(a, derive_long_tag(&tag("abc"), &cheap).unwrap());
}

#[test]
fn memory_hard_round_trip() {
    let scheme = TagScheme::new(
        24,
        KdfConfig::memory_hard(ScryptCost {
            log_n: 6,
            r: 8,
            p: 1,
        }),
    )
    .unwrap();
    let mut rng = ChaCha20Rng::seed_from_u64(3);
    let h = seal(b"slow and steady", &[tag("group")], &scheme, &mut rng).unwrap();
    assert_eq!(
        open(&h, &tag("group"), &scheme).unwrap(),
        b"slow and steady"
    );
    assert!(open(&h, &tag("grouq"), &scheme).is_none());
}

#[test]
fn split_of_long_tag_agrees_with_scheme() {
    for k in [6, 12, 18, 24, 32] {
        let scheme = TagScheme::fast(k).unwrap();
        let lt = derive_long_tag(&tag("occupy"), scheme.kdf()).unwrap();
        assert_eq!(split_tag(&lt, k).unwrap(), scheme.derive(&tag("occupy")));
    }
}

// Determinism of derivation: 1e3 tags, each derived twice.
#[test]
fn derivation_is_deterministic() {
    let scheme = TagScheme::fast(24).unwrap();
    for i in 0..1000 {
        let t = tag(&format!("tag-{i}"));
        assert_eq!(scheme.derive(&t), scheme.derive(&t));
    }
}

// Non-determinism of sealing: 1e4 pairs.
#[test]
fn sealing_twice_differs() {
    let scheme = TagScheme::fast(24).unwrap();
    let mut rng = ChaCha20Rng::seed_from_u64(11);
    let t = [tag("again")];
    for _ in 0..10_000 {
        let a = seal(b"same", &t, &scheme, &mut rng).unwrap();
        let b = seal(b"same", &t, &scheme, &mut rng).unwrap();
        assert_ne!(a.key_blocks(), b.key_blocks());
        assert_ne!(a.ciphertext(), b.ciphertext());
        assert_ne!(a.mac(), b.mac());
    }
}

// Collision soundness: colliding plain tags found by the collider share the
// short tag but cannot open each other's hoots.
#[test]
fn colliding_tag_cannot_open() {
    let scheme = TagScheme::fast(12).unwrap();
    let victim = tag("bieber");
    let spec = SearchSpec::new("org-", Target::Plain(victim.clone()), 3, scheme)
        .with_alphabet(Alphabet::alphanumeric())
        .with_mode(SearchMode::FirstN(5))
        .with_seed(1);
    let found = find_tag(&spec).unwrap();
    assert_eq!(found.matches.len(), 5);
    let mut rng = ChaCha20Rng::seed_from_u64(5);
    for m in &found.matches {
        assert_eq!(m.short_tag, scheme.short_tag(&victim));
        let h = seal(
            b"for bieber fans",
            std::slice::from_ref(&victim),
            &scheme,
            &mut rng,
        )
        .unwrap();
        assert!(open(&h, &m.plain_tag, &scheme).is_none());
        let back = seal(
            b"for the org",
            std::slice::from_ref(&m.plain_tag),
            &scheme,
            &mut rng,
        )
        .unwrap();
        assert!(open(&back, &victim, &scheme).is_none());
        assert_eq!(open(&back, &m.plain_tag, &scheme).unwrap(), b"for the org");
    }
}

#[test]
fn tag_material_opens_without_rederiving() {
    let scheme = TagScheme::fast(18).unwrap();
    let mat = scheme.derive(&tag("reader"));
    let mut rng = ChaCha20Rng::seed_from_u64(9);
    let h = tagcrypt::seal_with(b"hi", std::slice::from_ref(&mat), &mut rng).unwrap();
    assert_eq!(mat.open(&h).unwrap(), b"hi");
}

fn plain_tag_strategy() -> impl Strategy<Value = String> {
    "[a-zA-Z0-9_-]{1,24}"
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(128))]

    #[test]
    fn round_trip(
        msg in proptest::collection::vec(any::<u8>(), 0..200),
        t in plain_tag_strategy(),
        k in prop_oneof![Just(12u32), Just(18), Just(24), Just(32), 6u32..=64],
        seed in any::<u64>(),
    ) {
        let scheme = TagScheme::fast(k).unwrap();
        let t = tag(&t);
        let h = seal(&msg, std::slice::from_ref(&t), &scheme, &mut ChaCha20Rng::seed_from_u64(seed)).unwrap();
        prop_assert_eq!(h.short_tags()[0], scheme.short_tag(&t));
        prop_assert_eq!(open(&h, &t, &scheme), Some(msg));
    }

    #[test]
    fn any_bit_flip_is_rejected(
        msg in proptest::collection::vec(any::<u8>(), 1..64),
        which in 0usize..3,
        pos in any::<prop::sample::Index>(),
        bit in 0u8..8,
        seed in any::<u64>(),
    ) {
        let scheme = TagScheme::fast(24).unwrap();
        let t = tag("flip");
        let mut h = seal(&msg, std::slice::from_ref(&t), &scheme, &mut ChaCha20Rng::seed_from_u64(seed)).unwrap();
        match which {
            0 => { let c = h.ciphertext_mut(); let i = pos.index(c.len()); c[i] ^= 1 << bit; }
            1 => { let m = h.mac_mut(); let i = pos.index(m.len()); m[i] ^= 1 << bit; }
            _ => {
                // Nonce (0..8) or wrapped k_mac (24..40); both break the MAC.
                let kb = &mut h.key_blocks_mut()[0].0;
                let i = pos.index(24);
                let i = if i < 8 { i } else { i + 16 };
                kb[i] ^= 1 << bit;
            }
        }
        prop_assert!(open(&h, &t, &scheme).is_none());
    }

    // The MAC covers the ciphertext only, so a flip in the wrapped k_enc is
    // not detected: the hoot opens to a different message.
    #[test]
    fn wrapped_enc_key_flip_garbles(
        msg in proptest::collection::vec(any::<u8>(), 1..64),
        pos in 8usize..24,
        bit in 0u8..8,
        seed in any::<u64>(),
    ) {
        let scheme = TagScheme::fast(24).unwrap();
        let t = tag("flip");
        let mut h = seal(&msg, std::slice::from_ref(&t), &scheme, &mut ChaCha20Rng::seed_from_u64(seed)).unwrap();
        h.key_blocks_mut()[0].0[pos] ^= 1 << bit;
        let opened = open(&h, &t, &scheme).unwrap();
        prop_assert_eq!(opened.len(), msg.len());
        prop_assert_ne!(opened, msg);
    }

    #[test]
    fn multi_tag_every_member_opens(
        msg in proptest::collection::vec(any::<u8>(), 0..64),
        n in 1usize..5,
        seed in any::<u64>(),
    ) {
        let scheme = TagScheme::fast(24).unwrap();
        let tags: Vec<_> = (0..n).map(|i| tag(&format!("member{i}"))).collect();
        let h = seal(&msg, &tags, &scheme, &mut ChaCha20Rng::seed_from_u64(seed)).unwrap();
        prop_assert_eq!(h.key_blocks().len(), n);
        for t in &tags {
            prop_assert_eq!(open(&h, t, &scheme), Some(msg.clone()));
        }
        prop_assert!(open(&h, &tag("outsider"), &scheme).is_none());
    }
}
