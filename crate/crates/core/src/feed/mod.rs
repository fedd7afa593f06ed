//! In-memory microblog service.
//!
//! The feed stores wire lines, indexes them by every short tag they carry, and
//! rejects replays and censored posts at post time. It never decrypts
//! anything except when a whitelist rule asks it to try a censor's known
//! plain tags.

mod policy;
mod scenario;

use std::collections::{HashMap, HashSet, VecDeque};
use std::sync::{Arc, RwLock};

use sha2::{Digest, Sha256};

pub use policy::{CensorPolicy, CensorRule};
pub use scenario::{
    run_scenario, FeedStats, GroupSpec, Role, RuleSpec, ScenarioError, ScenarioScript, TagStats,
};

use crate::tagcrypt::{Hoot, ShortTag};
use crate::wire::{self, WireError, WireMessage, WireParams};

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct FeedPost {
    pub id: u64,
    pub sender: String,
    pub wire: WireMessage,
    /// Logical arrival time: the value of the post counter when it arrived,
    /// rejected posts included.
    pub arrival: u64,
    pub short_tags: Vec<ShortTag>,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Rejection {
    Malformed(WireError),
    Replay,
    /// Index of the policy rule that fired.
    Censored {
        rule: usize,
    },
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum PostOutcome {
    Accepted(u64),
    Rejected(Rejection),
}

impl PostOutcome {
    pub fn is_accepted(&self) -> bool {
        matches!(self, PostOutcome::Accepted(_))
    }
}

pub type DedupKey = [u8; 32];

/// SHA-256 over the key blocks and MAC. The session keys act as the hoot's
/// nonce; the server only ever sees them wrapped, so the wrapped form stands
/// in for them.
pub fn dedup_key(hoot: &Hoot) -> DedupKey {
    let mut h = Sha256::new();
    for block in hoot.key_blocks() {
        h.update(block.0);
    }
    h.update(hoot.mac());
    h.finalize().into()
}

/// Seen dedup keys, optionally bounded to the most recent `horizon` entries.
#[derive(Clone, Debug, Default)]
pub struct ReplayIndex {
    seen: HashSet<DedupKey>,
    order: VecDeque<DedupKey>,
    horizon: Option<usize>,
}

impl ReplayIndex {
    pub fn unbounded() -> Self {
        ReplayIndex::default()
    }

    /// Forgets keys older than the last `horizon` insertions.
    pub fn with_horizon(horizon: usize) -> Self {
        ReplayIndex {
            horizon: Some(horizon.max(1)),
            ..ReplayIndex::default()
        }
    }

    pub fn contains(&self, key: &DedupKey) -> bool {
        self.seen.contains(key)
    }

    pub fn insert(&mut self, key: DedupKey) -> bool {
        if !self.seen.insert(key) {
            return false;
        }
        if let Some(h) = self.horizon {
            self.order.push_back(key);
            while self.order.len() > h {
                let old = self.order.pop_front().expect("non-empty");
                self.seen.remove(&old);
            }
        }
        true
    }

    pub fn len(&self) -> usize {
        self.seen.len()
    }

    pub fn is_empty(&self) -> bool {
        self.seen.is_empty()
    }
}

pub struct Feed {
    params: WireParams,
    policy: CensorPolicy,
    posts: Vec<FeedPost>,
    by_tag: HashMap<ShortTag, Vec<usize>>,
    replay: ReplayIndex,
    clock: u64,
}

impl Feed {
    pub fn new(params: WireParams, policy: CensorPolicy) -> Self {
        Feed::with_replay_index(params, policy, ReplayIndex::unbounded())
    }

    pub fn with_replay_index(
        params: WireParams,
        policy: CensorPolicy,
        replay: ReplayIndex,
    ) -> Self {
        Feed {
            params,
            policy,
            posts: Vec::new(),
            by_tag: HashMap::new(),
            replay,
            clock: 0,
        }
    }

    pub fn params(&self) -> &WireParams {
        &self.params
    }

    pub fn post(&mut self, sender: &str, wire: &WireMessage) -> PostOutcome {
        self.clock += 1;
        let hoot = match wire::parse(wire.as_str(), &self.params) {
            Ok(h) => h,
            Err(e) => return PostOutcome::Rejected(Rejection::Malformed(e)),
        };
        let key = dedup_key(&hoot);
        if self.replay.contains(&key) {
            return PostOutcome::Rejected(Rejection::Replay);
        }
        if let Some(rule) = self.policy.evaluate(sender, &hoot) {
            return PostOutcome::Rejected(Rejection::Censored { rule });
        }
        self.replay.insert(key);

        let id = self.posts.len() as u64 + 1;
        let slot = self.posts.len();
        let mut tags = hoot.short_tags().to_vec();
        tags.dedup();
        for t in &tags {
            let ids = self.by_tag.entry(*t).or_default();
            if ids.last() != Some(&slot) {
                ids.push(slot);
            }
        }
        self.posts.push(FeedPost {
            id,
            sender: sender.to_string(),
            wire: wire.clone(),
            arrival: self.clock,
            short_tags: hoot.short_tags().to_vec(),
        });
        PostOutcome::Accepted(id)
    }

    /// Accepted posts carrying `short_tag` with id greater than `since`, in
    /// id order. Ids start at 1, so `since = 0` returns everything.
    pub fn search(&self, short_tag: ShortTag, since: u64) -> Vec<&FeedPost> {
        let Some(slots) = self.by_tag.get(&short_tag) else {
            return Vec::new();
        };
        let from = slots.partition_point(|&s| self.posts[s].id <= since);
        slots[from..].iter().map(|&s| &self.posts[s]).collect()
    }

    pub fn posts(&self) -> &[FeedPost] {
        &self.posts
    }

    pub fn last_id(&self) -> u64 {
        self.posts.len() as u64
    }

    pub fn policy(&self) -> &CensorPolicy {
        &self.policy
    }
}

/// A feed behind a reader-writer lock: posts are serialized, searches run
/// concurrently and see a consistent prefix of the post log.
#[derive(Clone)]
pub struct SharedFeed(Arc<RwLock<Feed>>);

impl SharedFeed {
    pub fn new(feed: Feed) -> Self {
        SharedFeed(Arc::new(RwLock::new(feed)))
    }

    pub fn post(&self, sender: &str, wire: &WireMessage) -> PostOutcome {
        self.0
            .write()
            .expect("feed lock poisoned")
            .post(sender, wire)
    }

    pub fn search(&self, short_tag: ShortTag, since: u64) -> Vec<FeedPost> {
        let feed = self.0.read().expect("feed lock poisoned");
        feed.search(short_tag, since).into_iter().cloned().collect()
    }

    pub fn last_id(&self) -> u64 {
        self.0.read().expect("feed lock poisoned").last_id()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::tagcrypt::{seal, PlainTag, TagScheme};
    use rand::SeedableRng;
    use rand_chacha::ChaCha20Rng;

    fn setup() -> (TagScheme, WireParams, ChaCha20Rng) {
        (
            TagScheme::fast(24).unwrap(),
            WireParams::new(24),
            ChaCha20Rng::seed_from_u64(9),
        )
    }

    fn wire_for(
        msg: &str,
        tags: &[&str],
        scheme: &TagScheme,
        params: &WireParams,
        rng: &mut ChaCha20Rng,
    ) -> WireMessage {
        let tags: Vec<_> = tags.iter().map(|t| PlainTag::new(*t).unwrap()).collect();
        wire::encode(&seal(msg.as_bytes(), &tags, scheme, rng).unwrap(), params).unwrap()
    }

    #[test]
    fn replay_is_rejected_fresh_seal_is_not() {
        let (scheme, params, mut rng) = setup();
        let mut feed = Feed::new(params, CensorPolicy::default());
        let w = wire_for("hello", &["g"], &scheme, &params, &mut rng);
        assert_eq!(feed.post("alice", &w), PostOutcome::Accepted(1));
        assert_eq!(
            feed.post("mallory", &w),
            PostOutcome::Rejected(Rejection::Replay)
        );
        let w2 = wire_for("hello", &["g"], &scheme, &params, &mut rng);
        assert_eq!(feed.post("alice", &w2), PostOutcome::Accepted(2));
        assert_eq!(feed.posts().len(), 2);
    }

    #[test]
    fn replay_with_different_ciphertext_is_still_a_replay() {
        // Same wrapped keys and MAC, altered body: the dedup key only covers
        // the header, so this is rejected before anyone tries to open it.
        let (scheme, params, mut rng) = setup();
        let t = PlainTag::new("g").unwrap();
        let mut feed = Feed::new(params, CensorPolicy::default());
        let h = seal(b"abc", &[t], &scheme, &mut rng).unwrap();
        assert!(feed
            .post("a", &wire::encode(&h, &params).unwrap())
            .is_accepted());
        let mut h2 = h.clone();
        h2.ciphertext_mut()[0] ^= 1;
        assert_eq!(
            feed.post("b", &wire::encode(&h2, &params).unwrap()),
            PostOutcome::Rejected(Rejection::Replay)
        );
    }

    #[test]
    fn malformed_is_rejected() {
        let (_, params, _) = setup();
        let mut feed = Feed::new(params, CensorPolicy::default());
        assert!(matches!(
            feed.post("x", &WireMessage::from_text("just chatting")),
            PostOutcome::Rejected(Rejection::Malformed(_))
        ));
        assert_eq!(feed.last_id(), 0);
    }

    #[test]
    fn search_since_and_unknown_tag() {
        let (scheme, params, mut rng) = setup();
        let mut feed = Feed::new(params, CensorPolicy::default());
        let g = scheme.short_tag(&PlainTag::new("g").unwrap());
        for i in 0..5 {
            feed.post(
                "s",
                &wire_for(&format!("m{i}"), &["g"], &scheme, &params, &mut rng),
            );
            feed.post("s", &wire_for("other", &["h"], &scheme, &params, &mut rng));
        }
        let all = feed.search(g, 0);
        assert_eq!(all.len(), 5);
        assert!(all.windows(2).all(|w| w[0].id < w[1].id));
        assert_eq!(feed.search(g, all[2].id).len(), 2);
        assert!(feed.search(g, feed.last_id()).is_empty());
        let nobody = ShortTag::new(0, 24).unwrap();
        assert!(feed.search(nobody, 0).is_empty() || nobody == g);
    }

    #[test]
    fn multi_tag_post_is_found_under_each_tag() {
        let (scheme, _, mut rng) = setup();
        let params = WireParams::new(24).with_budget(280);
        let mut feed = Feed::new(params, CensorPolicy::default());
        let w = wire_for("both", &["g1", "g2"], &scheme, &params, &mut rng);
        let id = match feed.post("s", &w) {
            PostOutcome::Accepted(id) => id,
            other => panic!("{other:?}"),
        };
        for t in ["g1", "g2"] {
            let st = scheme.short_tag(&PlainTag::new(t).unwrap());
            let found = feed.search(st, 0);
            assert_eq!(found.len(), 1);
            assert_eq!(found[0].id, id);
        }
    }

    #[test]
    fn horizon_forgets_old_keys() {
        let (scheme, params, mut rng) = setup();
        let mut feed = Feed::with_replay_index(
            params,
            CensorPolicy::default(),
            ReplayIndex::with_horizon(2),
        );
        let first = wire_for("1", &["g"], &scheme, &params, &mut rng);
        feed.post("s", &first);
        feed.post("s", &wire_for("2", &["g"], &scheme, &params, &mut rng));
        assert_eq!(
            feed.post("s", &first),
            PostOutcome::Rejected(Rejection::Replay)
        );
        feed.post("s", &wire_for("3", &["g"], &scheme, &params, &mut rng));
        assert!(feed.post("s", &first).is_accepted());
    }

    #[test]
    fn shared_feed_concurrent_readers() {
        let (scheme, params, mut rng) = setup();
        let feed = SharedFeed::new(Feed::new(params, CensorPolicy::default()));
        let g = scheme.short_tag(&PlainTag::new("g").unwrap());
        let wires: Vec<_> = (0..50)
            .map(|i| wire_for(&i.to_string(), &["g"], &scheme, &params, &mut rng))
            .collect();
        std::thread::scope(|s| {
            let writer = feed.clone();
            s.spawn(move || {
                for w in &wires {
                    writer.post("w", w);
                }
            });
            for _ in 0..4 {
                let reader = feed.clone();
                s.spawn(move || {
                    for _ in 0..100 {
                        let seen = reader.search(g, 0);
                        // A consistent prefix: ids 1..=n with no gaps.
                        for (i, p) in seen.iter().enumerate() {
                            assert_eq!(p.id, i as u64 + 1);
                        }
                    }
                });
            }
        });
        assert_eq!(feed.search(g, 0).len(), 50);
    }
}
