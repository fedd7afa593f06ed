//! Seal/open throughput measurement.
//!
//! Sealing includes the fast-hash tag derivation, session-key generation, key
//! wrapping, message encryption and the MAC. Opening uses tag material the
//! reader derived once, as a follower does when scanning a short tag. The
//! open workload is a pool of hoots on the reader's short tag where only a
//! fraction belong to the reader's group; the rest are cover traffic that is
//! rejected at the MAC check without decrypting the message.

use std::hint::black_box;
use std::time::Instant;

use rand::thread_rng;
use serde::Serialize;

use crate::tagcrypt::{seal, seal_with, Hoot, PlainTag, TagError, TagScheme};

#[derive(Clone, Copy, Debug)]
pub struct BenchConfig {
    pub iterations: usize,
    pub k: u32,
    pub message_len: usize,
    /// One hoot in this many opens belongs to the reader.
    pub match_every: usize,
}

impl Default for BenchConfig {
    fn default() -> Self {
        BenchConfig {
            iterations: 20_000,
            k: 24,
            message_len: 39,
            match_every: 10,
        }
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct ThroughputReport {
    pub iterations: usize,
    pub k: u32,
    pub message_len: usize,
    pub seal_per_sec: f64,
    /// Cover-traffic hoots rejected at the MAC.
    pub open_reject_per_sec: f64,
    /// Own hoots, fully decrypted.
    pub open_match_per_sec: f64,
    /// Mixed pool: `1/match_every` own hoots.
    pub open_mix_per_sec: f64,
    pub match_fraction: f64,
    /// `open_mix_per_sec / seal_per_sec`.
    pub open_seal_ratio: f64,
}

pub fn measure(cfg: &BenchConfig) -> Result<ThroughputReport, TagError> {
    let scheme = TagScheme::fast(cfg.k)?;
    let ours = PlainTag::new("bench-group")?;
    let message = vec![b'm'; cfg.message_len];
    let mut rng = thread_rng();
    let n = cfg.iterations.max(1);

    let started = Instant::now();
    for _ in 0..n {
        black_box(seal(
            black_box(&message),
            std::slice::from_ref(&ours),
            &scheme,
            &mut rng,
        )?);
    }
    let seal_per_sec = n as f64 / started.elapsed().as_secs_f64();

    let reader = scheme.derive(&ours);
    let mut cover = scheme.derive(&PlainTag::new("someone-else")?);
    cover.short_tag = reader.short_tag;
    let own: Vec<Hoot> = (0..n)
        .map(|_| seal_with(&message, std::slice::from_ref(&reader), &mut rng))
        .collect::<Result<_, _>>()?;
    let foreign: Vec<Hoot> = (0..n)
        .map(|_| seal_with(&message, std::slice::from_ref(&cover), &mut rng))
        .collect::<Result<_, _>>()?;
    let every = cfg.match_every.max(1);
    let mixed: Vec<&Hoot> = (0..n)
        .map(|i| if i % every == 0 { &own[i] } else { &foreign[i] })
        .collect();

    let rate = |pool: &mut dyn Iterator<Item = &Hoot>| {
        let started = Instant::now();
        let mut count = 0usize;
        for h in pool {
            black_box(reader.open(black_box(h)));
            count += 1;
        }
        count as f64 / started.elapsed().as_secs_f64()
    };
    let open_reject_per_sec = rate(&mut foreign.iter());
    let open_match_per_sec = rate(&mut own.iter());
    let open_mix_per_sec = rate(&mut mixed.iter().copied());

    Ok(ThroughputReport {
        iterations: n,
        k: cfg.k,
        message_len: cfg.message_len,
        seal_per_sec,
        open_reject_per_sec,
        open_match_per_sec,
        open_mix_per_sec,
        match_fraction: 1.0 / every as f64,
        open_seal_ratio: open_mix_per_sec / seal_per_sec,
    })
}
