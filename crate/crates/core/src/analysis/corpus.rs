use std::collections::{BTreeMap, HashSet};
use std::fmt;
use std::io::BufRead;

use rand::distributions::Alphanumeric;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;
use rand_distr::{Distribution, Zipf};
use rayon::prelude::*;

use super::AnalysisError;
use crate::tagcrypt::{ShortTag, TagScheme};

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct CorpusEntry {
    pub hashtag: String,
    pub count: u64,
}

/// Hashtags with their usage counts.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Corpus {
    entries: Vec<CorpusEntry>,
}

impl Corpus {
    pub fn new(entries: Vec<CorpusEntry>) -> Result<Self, AnalysisError> {
        if entries.is_empty() {
            return Err(AnalysisError::EmptyCorpus);
        }
        let mut seen = HashSet::with_capacity(entries.len());
        for e in &entries {
            if e.count == 0 {
                return Err(AnalysisError::ZeroCount(e.hashtag.clone()));
            }
            if !seen.insert(e.hashtag.as_str()) {
                return Err(AnalysisError::DuplicateHashtag(e.hashtag.clone()));
            }
        }
        Ok(Corpus { entries })
    }

    pub fn entries(&self) -> &[CorpusEntry] {
        &self.entries
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn total(&self) -> u64 {
        self.entries.iter().map(|e| e.count).sum()
    }

    /// Reads `hashtag,count` lines. A first line whose count does not parse
    /// is taken as a header; blank lines are skipped. The count is split off
    /// at the last comma.
    pub fn from_csv<R: BufRead>(reader: R) -> Result<Self, AnalysisError> {
        let mut entries = Vec::new();
        for (i, line) in reader.lines().enumerate() {
            let line = line.map_err(|e| AnalysisError::CorpusLine {
                line: i + 1,
                reason: e.to_string(),
            })?;
            let line = line.trim();
            if line.is_empty() {
                continue;
            }
            let bad = |reason: &str| AnalysisError::CorpusLine {
                line: i + 1,
                reason: reason.into(),
            };
            let (tag, count) = line
                .rsplit_once(',')
                .ok_or_else(|| bad("expected hashtag,count"))?;
            let count = match count.trim().parse::<u64>() {
                Ok(c) => c,
                Err(_) if i == 0 => continue,
                Err(_) => return Err(bad("count is not a non-negative integer")),
            };
            let tag = tag.trim();
            let tag = tag.strip_prefix('#').unwrap_or(tag);
            if tag.is_empty() {
                return Err(bad("empty hashtag"));
            }
            entries.push(CorpusEntry {
                hashtag: tag.to_string(),
                count,
            });
        }
        Corpus::new(entries)
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from("hashtag,count\n");
        for e in &self.entries {
            out.push_str(&format!("{},{}\n", e.hashtag, e.count));
        }
        out
    }
}

/// A synthetic corpus whose counts follow a Zipf law with the given
/// exponent. Every tag gets one use; the remaining `total - n_tags` uses are
/// drawn independently from Zipf(n_tags, exponent) over tag ranks. Tag names
/// are random 10-character alphanumerics.
pub fn generate_powerlaw_corpus(
    n_tags: usize,
    exponent: f64,
    total: u64,
    seed: u64,
) -> Result<Corpus, AnalysisError> {
    if n_tags == 0 {
        return Err(AnalysisError::Generator("n_tags must be at least 1".into()));
    }
    if exponent.is_nan() || exponent <= 0.0 {
        return Err(AnalysisError::Generator("exponent must be positive".into()));
    }
    if total < n_tags as u64 {
        return Err(AnalysisError::Generator(format!(
            "total {total} cannot give each of {n_tags} tags one use"
        )));
    }
    let mut rng = ChaCha20Rng::seed_from_u64(seed);
    let mut names = HashSet::with_capacity(n_tags);
    let mut entries = Vec::with_capacity(n_tags);
    while entries.len() < n_tags {
        let name: String = (&mut rng)
            .sample_iter(Alphanumeric)
            .take(10)
            .map(char::from)
            .collect();
        if names.insert(name.clone()) {
            entries.push(CorpusEntry {
                hashtag: name,
                count: 1,
            });
        }
    }
    if n_tags == 1 {
        entries[0].count = total;
    } else {
        let zipf = Zipf::new(n_tags as u64, exponent)
            .map_err(|e| AnalysisError::Generator(format!("{e:?}")))?;
        for _ in 0..total - n_tags as u64 {
            let rank = zipf.sample(&mut rng) as usize;
            entries[rank - 1].count += 1;
        }
    }
    Corpus::new(entries)
}

/// `(rank, count)` pairs, rank 1 being the largest count.
pub fn rank_frequency(counts: impl IntoIterator<Item = u64>) -> Vec<(usize, u64)> {
    let mut counts: Vec<u64> = counts.into_iter().collect();
    counts.sort_unstable_by(|a, b| b.cmp(a));
    counts
        .into_iter()
        .enumerate()
        .map(|(i, c)| (i + 1, c))
        .collect()
}

/// Least-squares slope of `ln count` on `ln rank` over the first
/// `min(1000, n)` ranks. An inspection aid rather than an estimator; `None`
/// with fewer than two points.
pub fn fit_loglog_slope(rank_freq: &[(usize, u64)]) -> Option<f64> {
    let pts: Vec<(f64, f64)> = rank_freq
        .iter()
        .take(1000)
        .map(|&(r, c)| ((r as f64).ln(), (c as f64).ln()))
        .collect();
    if pts.len() < 2 {
        return None;
    }
    let n = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
    Some(sxy / sxx)
}

#[derive(Clone, Debug, PartialEq)]
pub struct BucketMember {
    pub hashtag: String,
    pub count: u64,
    /// Posts from the other members of the bucket per post of this one.
    pub cover_ratio: f64,
}

/// All corpus hashtags sharing one short tag.
#[derive(Clone, Debug, PartialEq)]
pub struct Bucket {
    pub short_tag: ShortTag,
    pub volume: u64,
    /// Largest count first.
    pub members: Vec<BucketMember>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct AnonymityReport {
    pub k: u32,
    pub hashtags: usize,
    pub total_volume: u64,
    /// Largest volume first.
    pub buckets: Vec<Bucket>,
    /// Rank-frequency of the corpus hashtags.
    pub rank_frequency: Vec<(usize, u64)>,
    pub slope: Option<f64>,
    /// Number of buckets with a given member count.
    pub set_size_histogram: BTreeMap<usize, usize>,
}

/// Groups corpus hashtags by short tag. A leading `#` is ignored.
pub fn anonymity_report(corpus: &Corpus, scheme: &TagScheme) -> AnonymityReport {
    let tags: Vec<ShortTag> = corpus
        .entries()
        .par_iter()
        .map(|e| {
            let text = e.hashtag.strip_prefix('#').unwrap_or(&e.hashtag);
            scheme.short_tag_raw(text.as_bytes())
        })
        .collect();

    let mut grouped: BTreeMap<ShortTag, Vec<&CorpusEntry>> = BTreeMap::new();
    for (entry, tag) in corpus.entries().iter().zip(tags) {
        grouped.entry(tag).or_default().push(entry);
    }
    let mut buckets: Vec<Bucket> = grouped
        .into_iter()
        .map(|(short_tag, mut members)| {
            members.sort_by(|a, b| b.count.cmp(&a.count).then(a.hashtag.cmp(&b.hashtag)));
            let volume: u64 = members.iter().map(|m| m.count).sum();
            Bucket {
                short_tag,
                volume,
                members: members
                    .into_iter()
                    .map(|m| BucketMember {
                        hashtag: m.hashtag.clone(),
                        count: m.count,
                        cover_ratio: (volume - m.count) as f64 / m.count as f64,
                    })
                    .collect(),
            }
        })
        .collect();
    buckets.sort_by(|a, b| b.volume.cmp(&a.volume).then(a.short_tag.cmp(&b.short_tag)));

    let mut set_size_histogram = BTreeMap::new();
    for b in &buckets {
        *set_size_histogram.entry(b.members.len()).or_insert(0) += 1;
    }
    let rank_frequency = rank_frequency(corpus.entries().iter().map(|e| e.count));
    AnonymityReport {
        k: scheme.k(),
        hashtags: corpus.len(),
        total_volume: corpus.total(),
        slope: fit_loglog_slope(&rank_frequency),
        buckets,
        rank_frequency,
        set_size_histogram,
    }
}

impl AnonymityReport {
    pub fn rank_frequency_csv(&self) -> String {
        let mut out = String::from("rank,count\n");
        for (r, c) in &self.rank_frequency {
            out.push_str(&format!("{r},{c}\n"));
        }
        out
    }

    /// Key-value summary followed by up to `top` buckets.
    pub fn render(&self, top: usize) -> String {
        let mut out = String::new();
        out.push_str(&format!("k={}\n", self.k));
        out.push_str(&format!("hashtags={}\n", self.hashtags));
        out.push_str(&format!("total_volume={}\n", self.total_volume));
        out.push_str(&format!("buckets={}\n", self.buckets.len()));
        match self.slope {
            Some(s) => out.push_str(&format!("loglog_slope={s:.4}\n")),
            None => out.push_str("loglog_slope=-\n"),
        }
        for (size, n) in &self.set_size_histogram {
            out.push_str(&format!("set_size.{size}={n}\n"));
        }
        for b in self.buckets.iter().take(top) {
            let members: Vec<String> = b
                .members
                .iter()
                .map(|m| format!("{}:{}:{:.3}", m.hashtag, m.count, m.cover_ratio))
                .collect();
            out.push_str(&format!(
                "bucket.{}={} {}\n",
                b.short_tag,
                b.volume,
                members.join(",")
            ));
        }
        out
    }
}

impl fmt::Display for AnonymityReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.render(20))
    }
}
