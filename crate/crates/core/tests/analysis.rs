use h00t::analysis::{
    anonymity_report, collision_probability, generate_powerlaw_corpus, rank_frequency, Corpus,
    CorpusEntry,
};
use h00t::collider::{find_tag, SearchMode, SearchSpec, Target};
use h00t::{PlainTag, TagScheme};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

#[test]
fn collided_pair_forms_one_bucket() {
    let scheme = TagScheme::fast(8).unwrap();
    let a = PlainTag::new("a").unwrap();
    let spec =
        SearchSpec::new("b-", Target::Plain(a.clone()), 2, scheme).with_mode(SearchMode::FirstN(1));
    let b = find_tag(&spec).unwrap().matches.remove(0).plain_tag;
    let corpus = Corpus::new(vec![
        CorpusEntry {
            hashtag: "a".into(),
            count: 100,
        },
        CorpusEntry {
            hashtag: b.as_str().into(),
            count: 1,
        },
    ])
    .unwrap();
    let r = anonymity_report(&corpus, &scheme);
    assert_eq!(r.buckets.len(), 1);
    let bucket = &r.buckets[0];
    assert_eq!(bucket.short_tag, scheme.short_tag(&a));
    assert_eq!(bucket.volume, 101);
    assert_eq!(bucket.members.len(), 2);
    assert_eq!(bucket.members[1].hashtag, b.as_str());
    assert_eq!(bucket.members[1].cover_ratio, 100.0);
    assert_eq!(bucket.members[0].cover_ratio, 0.01);
    assert_eq!(r.set_size_histogram.get(&2), Some(&1));
}

// Scaled-down Monte Carlo cross-check: (4, 2, 2).
#[test]
fn collision_probability_small_monte_carlo() {
    let (a, c, l) = (4u64, 2u32, 2u32);
    let p = collision_probability(a, c, l);
    assert!((p - (1.0 - (15.0f64 / 16.0).powi(16))).abs() < 1e-12);
    let trials = 20_000;
    let mut rng = ChaCha8Rng::seed_from_u64(0);
    let hits = (0..trials)
        .filter(|_| (0..a.pow(l)).any(|_| rng.gen_range(0..a.pow(c)) == 0))
        .count();
    let sim = hits as f64 / trials as f64;
    let sigma = (p * (1.0 - p) / trials as f64).sqrt();
    assert!(
        (sim - p).abs() <= 3.0 * sigma,
        "formula {p}, simulated {sim}"
    );
}

#[test]
fn generator_is_deterministic_and_degenerate_cases() {
    let a = generate_powerlaw_corpus(500, 1.2, 5_000, 3).unwrap();
    assert_eq!(a, generate_powerlaw_corpus(500, 1.2, 5_000, 3).unwrap());
    assert_ne!(a, generate_powerlaw_corpus(500, 1.2, 5_000, 4).unwrap());
    assert_eq!(a.total(), 5_000);
    let one = generate_powerlaw_corpus(1, 1.0, 77, 0).unwrap();
    assert_eq!(one.entries()[0].count, 77);
    assert!(generate_powerlaw_corpus(10, 1.0, 9, 0).is_err());
    assert!(generate_powerlaw_corpus(0, 1.0, 9, 0).is_err());
    assert!(generate_powerlaw_corpus(10, 0.0, 90, 0).is_err());
}

#[test]
fn csv_round_trip() {
    let c = generate_powerlaw_corpus(50, 1.0, 400, 8).unwrap();
    assert_eq!(Corpus::from_csv(c.to_csv().as_bytes()).unwrap(), c);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn report_conserves_volume_and_buckets_recompute(
        counts in proptest::collection::vec(1u64..1000, 1..300),
        k in 1u32..=16,
    ) {
        let corpus = Corpus::new(
            counts.iter().enumerate().map(|(i, &c)| CorpusEntry { hashtag: format!("h{i}"), count: c }).collect(),
        ).unwrap();
        let scheme = TagScheme::for_search(k, h00t::KdfConfig::fast_hash()).unwrap();
        let r = anonymity_report(&corpus, &scheme);
        prop_assert_eq!(r.buckets.iter().map(|b| b.volume).sum::<u64>(), corpus.total());
        prop_assert_eq!(r.buckets.iter().map(|b| b.members.len()).sum::<usize>(), corpus.len());
        for b in &r.buckets {
            prop_assert_eq!(b.members.iter().map(|m| m.count).sum::<u64>(), b.volume);
            for m in &b.members {
                prop_assert_eq!(scheme.short_tag(&PlainTag::new(m.hashtag.clone()).unwrap()), b.short_tag);
            }
        }
        let rf = rank_frequency(counts.iter().copied());
        prop_assert!(rf.windows(2).all(|w| w[0].1 >= w[1].1));
        prop_assert_eq!(rf, r.rank_frequency);
    }
}
