//! Entropy, brute-force, collision and bandwidth arithmetic, plus
//! corpus-driven anonymity statistics.

mod corpus;

use thiserror::Error;

pub use corpus::{
    anonymity_report, fit_loglog_slope, generate_powerlaw_corpus, rank_frequency, AnonymityReport,
    Bucket, BucketMember, Corpus, CorpusEntry,
};

pub const SECONDS_PER_DAY: f64 = 86_400.0;
pub const SECONDS_PER_YEAR: f64 = 365.0 * SECONDS_PER_DAY;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum AnalysisError {
    #[error("namespace has no components")]
    EmptyNamespace,
    #[error("namespace component {0} has fewer than two values")]
    DegenerateComponent(usize),
    #[error("corpus is empty")]
    EmptyCorpus,
    #[error("hashtag {0:?} appears twice")]
    DuplicateHashtag(String),
    #[error("hashtag {0:?} has a zero count")]
    ZeroCount(String),
    #[error("corpus line {line}: {reason}")]
    CorpusLine { line: usize, reason: String },
    #[error("invalid generator parameters: {0}")]
    Generator(String),
}

/// One independently chosen piece of a plain tag.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum NamespaceComponent {
    /// A word from a dictionary of this many entries.
    Dictionary(u64),
    /// This many decimal digits.
    Digits(u32),
    /// `length` glyphs from an alphabet of `alphabet` glyphs.
    Glyphs { alphabet: u64, length: u32 },
}

impl NamespaceComponent {
    fn log2_size(&self) -> f64 {
        match *self {
            NamespaceComponent::Dictionary(n) => (n as f64).log2(),
            NamespaceComponent::Digits(d) => d as f64 * 10f64.log2(),
            NamespaceComponent::Glyphs { alphabet, length } => {
                length as f64 * (alphabet as f64).log2()
            }
        }
    }

    fn is_degenerate(&self) -> bool {
        match *self {
            NamespaceComponent::Dictionary(n) => n < 2,
            NamespaceComponent::Digits(d) => d == 0,
            NamespaceComponent::Glyphs { alphabet, length } => alphabet < 2 || length == 0,
        }
    }
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct NamespaceSpec {
    pub components: Vec<NamespaceComponent>,
}

impl NamespaceSpec {
    pub fn new(components: Vec<NamespaceComponent>) -> Self {
        NamespaceSpec { components }
    }
}

/// log2 of the number of plain tags the namespace can produce.
pub fn entropy_bits(spec: &NamespaceSpec) -> Result<f64, AnalysisError> {
    if spec.components.is_empty() {
        return Err(AnalysisError::EmptyNamespace);
    }
    if let Some(i) = spec
        .components
        .iter()
        .position(NamespaceComponent::is_degenerate)
    {
        return Err(AnalysisError::DegenerateComponent(i));
    }
    Ok(spec
        .components
        .iter()
        .map(NamespaceComponent::log2_size)
        .sum())
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct BruteForceTime {
    /// Seconds to try the whole space.
    pub full_secs: f64,
    /// Expected seconds to hit the secret: half the space.
    pub expected_secs: f64,
}

impl BruteForceTime {
    pub fn full_days(&self) -> f64 {
        self.full_secs / SECONDS_PER_DAY
    }

    pub fn full_years(&self) -> f64 {
        self.full_secs / SECONDS_PER_YEAR
    }
}

/// Time for `cores` cores at `rate` guesses per second each to search
/// `2^entropy` plain tags.
pub fn brute_force_time(entropy: f64, rate: f64, cores: f64) -> BruteForceTime {
    let full = (entropy - (rate * cores).log2()).exp2();
    BruteForceTime {
        full_secs: full,
        expected_secs: full / 2.0,
    }
}

/// Probability that `|A|^L` independent uniform short tags of `c` glyphs
/// over `A` contain at least one equal to a fixed target:
/// `1 - (1 - |A|^-c)^(|A|^L)`.
pub fn collision_probability(alphabet_size: u64, c: u32, suffix_len: u32) -> f64 {
    -log_miss_probability(alphabet_size, c, suffix_len).exp_m1()
}

/// Natural log of the probability of finding no collision,
/// `|A|^L * ln(1 - |A|^-c)`, computed without cancellation.
pub fn log_miss_probability(alphabet_size: u64, c: u32, suffix_len: u32) -> f64 {
    assert!(
        alphabet_size >= 1 && c >= 1,
        "alphabet and tag length must be positive"
    );
    let ln_a = (alphabet_size as f64).ln();
    let q = (-(c as f64) * ln_a).exp();
    let trials = (suffix_len as f64 * ln_a).exp();
    if q >= 1.0 {
        return f64::NEG_INFINITY;
    }
    trials * (-q).ln_1p()
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Bandwidth {
    /// Messages per second landing on one short tag, split uniformly.
    pub per_tag_per_sec: f64,
    pub per_tag_per_min: f64,
    /// Messages per second the link can carry.
    pub link_msgs_per_sec: f64,
    /// Link capacity over per-tag load; infinite when the load is zero.
    pub headroom: f64,
}

pub fn bandwidth_budget(total_rate: f64, k: u32, link_bps: f64, msg_bits: f64) -> Bandwidth {
    let per_tag = total_rate / 2f64.powi(k as i32);
    let link = link_bps / msg_bits;
    Bandwidth {
        per_tag_per_sec: per_tag,
        per_tag_per_min: per_tag * 60.0,
        link_msgs_per_sec: link,
        headroom: if per_tag > 0.0 {
            link / per_tag
        } else {
            f64::INFINITY
        },
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use NamespaceComponent::*;

    #[test]
    fn entropy_examples() {
        let one_word = NamespaceSpec::new(vec![Dictionary(40_000), Digits(7)]);
        assert!((entropy_bits(&one_word).unwrap() - 38.5).abs() < 0.05);
        let two_words = NamespaceSpec::new(vec![Dictionary(40_000), Dictionary(40_000), Digits(7)]);
        assert!((entropy_bits(&two_words).unwrap() - 53.8).abs() < 0.05);
        let digits = entropy_bits(&NamespaceSpec::new(vec![Digits(15)])).unwrap();
        assert!((digits - 49.83).abs() < 0.01);
        assert!(digits >= 47.0);
        // 14 digits fall short of 47 bits.
        assert!(entropy_bits(&NamespaceSpec::new(vec![Digits(14)])).unwrap() < 47.0);
        let glyphs = NamespaceSpec::new(vec![Glyphs {
            alphabet: 64,
            length: 6,
        }]);
        assert!((entropy_bits(&glyphs).unwrap() - 36.0).abs() < 1e-9);
    }

    #[test]
    fn entropy_errors() {
        assert_eq!(
            entropy_bits(&NamespaceSpec::default()),
            Err(AnalysisError::EmptyNamespace)
        );
        assert_eq!(
            entropy_bits(&NamespaceSpec::new(vec![Digits(3), Dictionary(1)])),
            Err(AnalysisError::DegenerateComponent(1))
        );
    }

    #[test]
    fn brute_force_scaling() {
        let t = brute_force_time(47.0, 2f64.powi(18), 2f64.powi(10));
        assert!((t.full_secs - 2f64.powi(19)).abs() < 1e-6);
        assert_eq!(t.expected_secs * 2.0, t.full_secs);
        let doubled = brute_force_time(47.0, 2f64.powi(18), 2f64.powi(11));
        assert!((doubled.full_secs * 2.0 - t.full_secs).abs() < 1e-6);
    }

    #[test]
    fn collision_probability_edges() {
        // L = 0: a single trial.
        for (a, c) in [(62u64, 2u32), (2, 5), (10, 1)] {
            let p = collision_probability(a, c, 0);
            assert!((p - (a as f64).powi(-(c as i32))).abs() < 1e-15);
        }
        assert!(collision_probability(62, 2, 3) >= 1.0 - 1e-20);
        assert!(log_miss_probability(62, 2, 3) < -46.0);
        assert_eq!(collision_probability(1, 3, 2), 1.0);
        // Monotone in L, antitone in c.
        for a in [2u64, 10, 62] {
            for c in 1..5 {
                for l in 0..6 {
                    assert!(collision_probability(a, c, l + 1) >= collision_probability(a, c, l));
                    assert!(collision_probability(a, c + 1, l) <= collision_probability(a, c, l));
                }
            }
        }
        // No cancellation for tiny q.
        let p = collision_probability(62, 10, 1);
        let expect = 62f64 * 62f64.powi(-10);
        assert!((p / expect - 1.0).abs() < 1e-9);
    }

    #[test]
    fn bandwidth_examples() {
        let b = bandwidth_budget(7000.0, 18, 128_000.0, 140.0 * 8.0);
        assert!((b.per_tag_per_sec - 0.0267).abs() < 1e-4);
        assert!((b.per_tag_per_min - 1.6).abs() < 0.016);
        assert!((b.link_msgs_per_sec - 114.0).abs() < 0.5);
        let z = bandwidth_budget(0.0, 18, 128_000.0, 1120.0);
        assert_eq!(z.per_tag_per_sec, 0.0);
        assert_eq!(z.headroom, f64::INFINITY);
    }
}
