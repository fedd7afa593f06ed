//! Find-Tag: search `prefix + suffix` plain tags whose short tag equals a
//! target short tag.
//!
//! The suffix space is every string of `suffix_len` glyphs over an alphabet,
//! indexed `0..|A|^L` with the first glyph most significant. Random mode walks
//! a seeded permutation of that index range so that an observer who learns
//! part of the walk learns nothing about where the chosen suffix sits in
//! lexicographic order.

mod permute;

use std::ops::Range;
use std::sync::atomic::{AtomicBool, AtomicUsize, Ordering};
use std::time::{Duration, Instant};

use rayon::prelude::*;
use thiserror::Error;

pub use permute::IndexPermutation;

use crate::tagcrypt::{PlainTag, ShortTag, TagScheme, MAX_PLAIN_TAG_BYTES};

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum SearchError {
    #[error("suffix alphabet is empty")]
    EmptyAlphabet,
    #[error("glyph {0:?} appears twice in the alphabet")]
    DuplicateGlyph(char),
    #[error("glyph {0:?} cannot appear in a plain tag")]
    WhitespaceGlyph(char),
    #[error("prefix is not a valid plain tag prefix")]
    BadPrefix,
    #[error("search space {alphabet}^{len} does not fit in 64 bits")]
    SpaceTooLarge { alphabet: usize, len: u32 },
    #[error("candidates would exceed {MAX_PLAIN_TAG_BYTES} bytes")]
    CandidateTooLong,
    #[error("target short tag is {found} bits; search uses k={expected}")]
    TargetWidth { found: u32, expected: u32 },
    #[error("suffix length 0 leaves only the prefix, and it does not match")]
    EmptySuffixNoMatch,
    #[error("shard count must be at least 1")]
    ZeroShards,
    #[error("index range {start}..{end} outside the space of {size} candidates")]
    BadRange { start: u64, end: u64, size: u64 },
}

/// Ordered set of suffix glyphs.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Alphabet {
    glyphs: Vec<char>,
    encoded: Vec<Vec<u8>>,
}

impl Alphabet {
    pub fn new(glyphs: impl IntoIterator<Item = char>) -> Result<Self, SearchError> {
        let glyphs: Vec<char> = glyphs.into_iter().collect();
        if glyphs.is_empty() {
            return Err(SearchError::EmptyAlphabet);
        }
        for (i, c) in glyphs.iter().enumerate() {
            if c.is_whitespace() {
                return Err(SearchError::WhitespaceGlyph(*c));
            }
            if glyphs[..i].contains(c) {
                return Err(SearchError::DuplicateGlyph(*c));
            }
        }
        let encoded = glyphs.iter().map(|c| c.to_string().into_bytes()).collect();
        Ok(Alphabet { glyphs, encoded })
    }

    /// `0-9a-zA-Z`.
    pub fn alphanumeric() -> Self {
        Self::new(('0'..='9').chain('a'..='z').chain('A'..='Z')).expect("static alphabet")
    }

    /// Standard Base64 digits, `A-Za-z0-9+/`.
    pub fn base64() -> Self {
        Self::new(
            ('A'..='Z')
                .chain('a'..='z')
                .chain('0'..='9')
                .chain(['+', '/']),
        )
        .expect("static alphabet")
    }

    pub fn len(&self) -> usize {
        self.glyphs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.glyphs.is_empty()
    }

    pub fn glyphs(&self) -> &[char] {
        &self.glyphs
    }

    fn max_glyph_bytes(&self) -> usize {
        self.encoded.iter().map(Vec::len).max().unwrap_or(0)
    }
}

impl Default for Alphabet {
    fn default() -> Self {
        Alphabet::alphanumeric()
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Target {
    Plain(PlainTag),
    Short(ShortTag),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum SearchMode {
    /// Every candidate in the range.
    Exhaustive,
    /// Random order until this many matches are found.
    FirstN(usize),
}

#[derive(Clone, Debug)]
pub struct SearchSpec {
    pub prefix: String,
    pub target: Target,
    pub alphabet: Alphabet,
    pub suffix_len: u32,
    pub mode: SearchMode,
    pub scheme: TagScheme,
    /// Seeds the random visiting order.
    pub seed: u64,
    /// Restricts the search to a slice of the index space; `None` is all of it.
    pub range: Option<Range<u64>>,
}

impl SearchSpec {
    pub fn new(
        prefix: impl Into<String>,
        target: Target,
        suffix_len: u32,
        scheme: TagScheme,
    ) -> Self {
        SearchSpec {
            prefix: prefix.into(),
            target,
            alphabet: Alphabet::default(),
            suffix_len,
            mode: SearchMode::Exhaustive,
            scheme,
            seed: 0,
            range: None,
        }
    }

    pub fn with_alphabet(mut self, alphabet: Alphabet) -> Self {
        self.alphabet = alphabet;
        self
    }

    pub fn with_mode(mut self, mode: SearchMode) -> Self {
        self.mode = mode;
        self
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }

    /// `|A|^L`.
    pub fn space_size(&self) -> Result<u64, SearchError> {
        (self.alphabet.len() as u64)
            .checked_pow(self.suffix_len)
            .ok_or(SearchError::SpaceTooLarge {
                alphabet: self.alphabet.len(),
                len: self.suffix_len,
            })
    }

    pub fn index_range(&self) -> Result<Range<u64>, SearchError> {
        let size = self.space_size()?;
        match &self.range {
            None => Ok(0..size),
            Some(r) if r.start <= r.end && r.end <= size => Ok(r.clone()),
            Some(r) => Err(SearchError::BadRange {
                start: r.start,
                end: r.end,
                size,
            }),
        }
    }

    pub fn target_short_tag(&self) -> Result<ShortTag, SearchError> {
        let tag = match &self.target {
            Target::Plain(p) => self.scheme.short_tag(p),
            Target::Short(s) => *s,
        };
        if tag.k() != self.scheme.k() {
            return Err(SearchError::TargetWidth {
                found: tag.k(),
                expected: self.scheme.k(),
            });
        }
        Ok(tag)
    }

    /// The plain tag at `index`.
    pub fn candidate(&self, index: u64) -> String {
        let mut buf = Vec::new();
        self.write_candidate(index, &mut buf);
        String::from_utf8(buf).expect("alphabet glyphs are UTF-8")
    }

    fn write_candidate(&self, mut index: u64, buf: &mut Vec<u8>) {
        buf.clear();
        buf.extend_from_slice(self.prefix.as_bytes());
        let base = self.alphabet.len() as u64;
        let mut digits = [0usize; 64];
        for d in digits[..self.suffix_len as usize].iter_mut().rev() {
            *d = (index % base) as usize;
            index /= base;
        }
        for &d in &digits[..self.suffix_len as usize] {
            buf.extend_from_slice(&self.alphabet.encoded[d]);
        }
    }

    fn validate(&self) -> Result<(), SearchError> {
        if self.prefix.chars().any(char::is_whitespace) {
            return Err(SearchError::BadPrefix);
        }
        if self.prefix.is_empty() && self.suffix_len == 0 {
            return Err(SearchError::BadPrefix);
        }
        if self.suffix_len > 64 {
            return Err(SearchError::SpaceTooLarge {
                alphabet: self.alphabet.len(),
                len: self.suffix_len,
            });
        }
        self.index_range()?;
        let longest =
            self.prefix.len() + self.suffix_len as usize * self.alphabet.max_glyph_bytes();
        if longest > MAX_PLAIN_TAG_BYTES {
            return Err(SearchError::CandidateTooLong);
        }
        self.target_short_tag()?;
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Match {
    pub plain_tag: PlainTag,
    pub short_tag: ShortTag,
    /// Position of the suffix in the index space.
    pub index: u64,
}

#[derive(Clone, Debug, Default)]
pub struct SearchResult {
    pub matches: Vec<Match>,
    pub candidates_tried: u64,
    pub elapsed: Duration,
}

impl SearchResult {
    /// Recomputes every match's short tag from scratch.
    pub fn verify(&self, scheme: &TagScheme, target: ShortTag) -> bool {
        self.matches
            .iter()
            .all(|m| m.short_tag == target && scheme.short_tag(&m.plain_tag) == target)
    }
}

/// Runs a search to completion (or until `FirstN` is satisfied).
pub fn find_tag(spec: &SearchSpec) -> Result<SearchResult, SearchError> {
    find_tag_cancellable(spec, &AtomicBool::new(false))
}

/// As [`find_tag`], stopping at the next candidate once `cancel` is set.
pub fn find_tag_cancellable(
    spec: &SearchSpec,
    cancel: &AtomicBool,
) -> Result<SearchResult, SearchError> {
    spec.validate()?;
    let shared = SharedProgress {
        cancel,
        found: None,
    };
    let result = run_shard(spec, &shared)?;
    if spec.suffix_len == 0 && result.matches.is_empty() {
        return Err(SearchError::EmptySuffixNoMatch);
    }
    Ok(result)
}

/// Splits the index space into `shards` contiguous, disjoint, covering
/// ranges. More shards than candidates yields single-candidate shards.
pub fn partition(spec: &SearchSpec, shards: usize) -> Result<Vec<SearchSpec>, SearchError> {
    if shards == 0 {
        return Err(SearchError::ZeroShards);
    }
    let range = spec.index_range()?;
    let len = range.end - range.start;
    let shards = (shards as u64).min(len.max(1));
    let base = len / shards;
    let extra = len % shards;
    let mut start = range.start;
    Ok((0..shards)
        .map(|i| {
            let size = base + u64::from(i < extra);
            let mut shard = spec.clone();
            shard.range = Some(start..start + size);
            // Distinct visiting orders per shard.
            shard.seed = spec.seed ^ (i.wrapping_mul(0x9e37_79b9_7f4a_7c15));
            start += size;
            shard
        })
        .collect())
}

/// Runs `shards` partitions on the rayon pool and merges their results.
/// Exhaustive results are sorted by index, so they do not depend on the
/// shard count.
pub fn find_tag_parallel(spec: &SearchSpec, shards: usize) -> Result<SearchResult, SearchError> {
    find_tag_parallel_cancellable(spec, shards, &AtomicBool::new(false))
}

pub fn find_tag_parallel_cancellable(
    spec: &SearchSpec,
    shards: usize,
    cancel: &AtomicBool,
) -> Result<SearchResult, SearchError> {
    spec.validate()?;
    let started = Instant::now();
    let parts = partition(spec, shards)?;
    let found = AtomicUsize::new(0);
    let shared = SharedProgress {
        cancel,
        found: Some(&found),
    };
    let results: Vec<SearchResult> = parts
        .par_iter()
        .map(|s| run_shard(s, &shared))
        .collect::<Result<_, _>>()?;

    let mut merged = SearchResult::default();
    for r in results {
        merged.candidates_tried += r.candidates_tried;
        merged.matches.extend(r.matches);
    }
    match spec.mode {
        SearchMode::Exhaustive => merged.matches.sort_by_key(|m| m.index),
        SearchMode::FirstN(n) => merged.matches.truncate(n),
    }
    merged.elapsed = started.elapsed();
    if spec.suffix_len == 0 && merged.matches.is_empty() {
        return Err(SearchError::EmptySuffixNoMatch);
    }
    Ok(merged)
}

struct SharedProgress<'a> {
    cancel: &'a AtomicBool,
    /// Match counter shared across shards in `FirstN` mode.
    found: Option<&'a AtomicUsize>,
}

fn run_shard(spec: &SearchSpec, shared: &SharedProgress<'_>) -> Result<SearchResult, SearchError> {
    let started = Instant::now();
    let target = spec.target_short_tag()?;
    let range = spec.index_range()?;
    if spec.scheme.kdf().is_memory_hard() {
        log::warn!(
            "collider running with a memory-hard KDF; each candidate costs one full derivation"
        );
    }
    let mut result = SearchResult::default();
    let mut buf = Vec::with_capacity(spec.prefix.len() + 4 * spec.suffix_len as usize);
    let mut check = |index: u64, result: &mut SearchResult| -> bool {
        spec.write_candidate(index, &mut buf);
        result.candidates_tried += 1;
        if spec.scheme.short_tag_raw(&buf) == target {
            let text = String::from_utf8(buf.clone()).expect("UTF-8 candidate");
            result.matches.push(Match {
                plain_tag: PlainTag::new(text).expect("candidate validated"),
                short_tag: target,
                index,
            });
            return true;
        }
        false
    };

    match spec.mode {
        SearchMode::Exhaustive => {
            for index in range {
                if shared.cancel.load(Ordering::Relaxed) {
                    break;
                }
                check(index, &mut result);
            }
        }
        SearchMode::FirstN(n) => {
            let len = range.end - range.start;
            if n > 0 && len > 0 {
                let perm = IndexPermutation::new(len, spec.seed);
                for i in 0..len {
                    if shared.cancel.load(Ordering::Relaxed) {
                        break;
                    }
                    if let Some(found) = shared.found {
                        if found.load(Ordering::Relaxed) >= n {
                            break;
                        }
                    }
                    if check(range.start + perm.apply(i), &mut result) {
                        let total = match shared.found {
                            Some(found) => found.fetch_add(1, Ordering::Relaxed) + 1,
                            None => result.matches.len(),
                        };
                        if total >= n {
                            break;
                        }
                    }
                }
            }
        }
    }
    result.elapsed = started.elapsed();
    Ok(result)
}

/// Back-of-envelope search times.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct RuntimeEstimate {
    /// Seconds to try every candidate.
    pub exhaustive_secs: f64,
    /// Expected seconds until the first match: `2^k / rate`.
    pub first_match_secs: f64,
}

pub fn estimate_runtime(
    spec: &SearchSpec,
    hash_rate: f64,
    cores: u32,
) -> Result<RuntimeEstimate, SearchError> {
    let space = (spec.alphabet.len() as f64).powi(spec.suffix_len as i32);
    Ok(estimate_from_space(
        space,
        spec.scheme.k(),
        hash_rate,
        cores,
    ))
}

pub fn estimate_from_space(space: f64, k: u32, hash_rate: f64, cores: u32) -> RuntimeEstimate {
    assert!(
        hash_rate > 0.0 && cores > 0,
        "rate and cores must be positive"
    );
    let throughput = hash_rate * cores as f64;
    RuntimeEstimate {
        exhaustive_secs: space / throughput,
        first_match_secs: 2f64.powi(k as i32) / throughput,
    }
}
