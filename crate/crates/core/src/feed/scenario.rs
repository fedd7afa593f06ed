//! Scripted feed runs.
//!
//! A scenario is a TOML document:
//!
//! ```toml
//! seed = 7
//! k = 12                 # short-tag width (default 24)
//! glyph_budget = 140     # optional
//! replays = 5            # re-posts of already accepted lines (default 0)
//!
//! [[group]]
//! name = "pop"
//! plain_tag = "bieber"
//! messages = 100
//! rate = 10.0            # mean posts per logical time unit (default 1)
//! senders = 20           # distinct sender names (default 1)
//!
//! [[group]]
//! name = "org"
//! role = "target"        # "target" or "cover" (default)
//! collide_with = "pop"   # search a plain tag sharing pop's short tag
//! prefix = "free-egypt-" # collider prefix (default "<name>-")
//! messages = 10
//!
//! [[rule]]
//! kind = "block-short-tag"        # or "block-sender", "whitelist-short-tag"
//! group = "org"                   # or tag = "<base32 short tag>"
//! # known = ["pop"]               # whitelist: groups whose plain tags the censor holds
//! # sender = "org-0"              # block-sender
//! ```
//!
//! All randomness (collider order, arrival times, session keys, replay
//! picks) flows from `seed`. Tags are derived in fast-hash mode.

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::fmt;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;
use rand_distr::{Distribution, Exp};
use serde::Deserialize;
use thiserror::Error;

use super::{CensorPolicy, CensorRule, Feed, PostOutcome, Rejection};
use crate::collider::{self, SearchError, SearchMode, SearchSpec, Target};
use crate::tagcrypt::{self, PlainTag, ShortTag, TagError, TagScheme, DEFAULT_K};
use crate::wire::{self, WireError, WireParams, DEFAULT_GLYPH_BUDGET};

#[derive(Debug, Error)]
pub enum ScenarioError {
    #[error("scenario parse error: {0}")]
    Parse(#[from] toml::de::Error),
    #[error("group {0:?} is not defined")]
    UndefinedGroup(String),
    #[error("group {0:?} defined twice")]
    DuplicateGroup(String),
    #[error("group {0:?} needs either plain_tag or collide_with")]
    MissingTag(String),
    #[error("group {0:?} has a non-positive rate")]
    BadRate(String),
    #[error("collide_with chain for {0:?} never resolves")]
    CollisionCycle(String),
    #[error("no plain tag for {0:?} collides with its target in the searched space")]
    NoCollision(String),
    #[error("rule {0} names neither a group nor a tag")]
    RuleTarget(usize),
    #[error(transparent)]
    Tag(#[from] TagError),
    #[error(transparent)]
    Search(#[from] SearchError),
    #[error(transparent)]
    Wire(#[from] WireError),
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Role {
    Target,
    #[default]
    Cover,
}

#[derive(Clone, Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GroupSpec {
    pub name: String,
    pub plain_tag: Option<String>,
    pub collide_with: Option<String>,
    pub prefix: Option<String>,
    pub suffix_len: Option<u32>,
    pub messages: usize,
    #[serde(default = "one")]
    pub rate: f64,
    #[serde(default)]
    pub role: Role,
    #[serde(default = "one_usize")]
    pub senders: usize,
}

fn one() -> f64 {
    1.0
}

fn one_usize() -> usize {
    1
}

fn default_k() -> u32 {
    DEFAULT_K
}

#[derive(Clone, Debug, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum RuleSpec {
    BlockShortTag {
        group: Option<String>,
        tag: Option<String>,
    },
    BlockSender {
        sender: String,
    },
    WhitelistShortTag {
        group: Option<String>,
        tag: Option<String>,
        #[serde(default)]
        known: Vec<String>,
    },
}

#[derive(Clone, Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioScript {
    pub seed: u64,
    #[serde(default = "default_k")]
    pub k: u32,
    pub glyph_budget: Option<usize>,
    #[serde(default)]
    pub replays: usize,
    #[serde(default, rename = "group")]
    pub groups: Vec<GroupSpec>,
    #[serde(default, rename = "rule")]
    pub rules: Vec<RuleSpec>,
}

impl ScenarioScript {
    pub fn from_toml(text: &str) -> Result<Self, ScenarioError> {
        Ok(toml::from_str(text)?)
    }
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct TagStats {
    pub posts: u64,
    pub blocked: u64,
    pub groups: BTreeSet<String>,
    pub target_posts: u64,
    pub cover_posts: u64,
}

impl TagStats {
    /// Cover posts per target post, when the tag carries target traffic.
    pub fn cover_ratio(&self) -> Option<f64> {
        (self.target_posts > 0).then(|| self.cover_posts as f64 / self.target_posts as f64)
    }
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct FeedStats {
    pub seed: u64,
    pub k: u32,
    pub posts: u64,
    pub accepted: u64,
    pub blocked: u64,
    pub replay_attempts: u64,
    pub replays_rejected: u64,
    /// Wire lines stored more than once; replay safety keeps this at zero.
    pub duplicate_copies: u64,
    pub target_posts: u64,
    pub target_blocked: u64,
    pub collateral_posts: u64,
    pub collateral_blocked: u64,
    /// Plain tag resolved for each group.
    pub plain_tags: BTreeMap<String, String>,
    pub per_tag: BTreeMap<String, TagStats>,
}

impl FeedStats {
    pub fn target_block_rate(&self) -> f64 {
        ratio(self.target_blocked, self.target_posts)
    }

    pub fn collateral_block_rate(&self) -> f64 {
        ratio(self.collateral_blocked, self.collateral_posts)
    }
}

fn ratio(a: u64, b: u64) -> f64 {
    if b == 0 {
        0.0
    } else {
        a as f64 / b as f64
    }
}

impl fmt::Display for FeedStats {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "seed={}", self.seed)?;
        writeln!(f, "k={}", self.k)?;
        writeln!(f, "posts={}", self.posts)?;
        writeln!(f, "accepted={}", self.accepted)?;
        writeln!(f, "blocked={}", self.blocked)?;
        writeln!(f, "replay_attempts={}", self.replay_attempts)?;
        writeln!(f, "replays_rejected={}", self.replays_rejected)?;
        writeln!(f, "duplicate_copies={}", self.duplicate_copies)?;
        writeln!(f, "target_posts={}", self.target_posts)?;
        writeln!(f, "target_blocked={}", self.target_blocked)?;
        writeln!(f, "target_block_rate={:.6}", self.target_block_rate())?;
        writeln!(f, "collateral_posts={}", self.collateral_posts)?;
        writeln!(f, "collateral_blocked={}", self.collateral_blocked)?;
        writeln!(
            f,
            "collateral_block_rate={:.6}",
            self.collateral_block_rate()
        )?;
        for (group, tag) in &self.plain_tags {
            writeln!(f, "group.{group}.plain_tag={tag}")?;
        }
        for (tag, s) in &self.per_tag {
            writeln!(f, "tag.{tag}.posts={}", s.posts)?;
            writeln!(f, "tag.{tag}.blocked={}", s.blocked)?;
            writeln!(f, "tag.{tag}.groups={}", s.groups.len())?;
            writeln!(f, "tag.{tag}.target_posts={}", s.target_posts)?;
            writeln!(f, "tag.{tag}.cover_posts={}", s.cover_posts)?;
            match s.cover_ratio() {
                Some(r) => writeln!(f, "tag.{tag}.cover_ratio={r:.6}")?,
                None => writeln!(f, "tag.{tag}.cover_ratio=-")?,
            }
        }
        Ok(())
    }
}

/// Smallest alphanumeric suffix length with at least 16 expected matches.
fn default_suffix_len(k: u32) -> u32 {
    let want = 16.0 * 2f64.powi(k as i32);
    (1..=12u32)
        .find(|&l| 62f64.powi(l as i32) >= want)
        .unwrap_or(12)
}

fn resolve_plain_tags(
    script: &ScenarioScript,
    scheme: &TagScheme,
) -> Result<Vec<PlainTag>, ScenarioError> {
    let index: HashMap<&str, usize> = script
        .groups
        .iter()
        .enumerate()
        .map(|(i, g)| (g.name.as_str(), i))
        .collect();
    if index.len() != script.groups.len() {
        let mut seen = BTreeSet::new();
        let dup = script
            .groups
            .iter()
            .find(|g| !seen.insert(&g.name))
            .expect("duplicate");
        return Err(ScenarioError::DuplicateGroup(dup.name.clone()));
    }
    let mut resolved: Vec<Option<PlainTag>> = vec![None; script.groups.len()];
    for (i, g) in script.groups.iter().enumerate() {
        if g.rate.is_nan() || g.rate <= 0.0 {
            return Err(ScenarioError::BadRate(g.name.clone()));
        }
        match (&g.plain_tag, &g.collide_with) {
            (Some(p), _) => resolved[i] = Some(PlainTag::new(p.as_str())?),
            (None, Some(other)) => {
                if !index.contains_key(other.as_str()) {
                    return Err(ScenarioError::UndefinedGroup(other.clone()));
                }
            }
            (None, None) => return Err(ScenarioError::MissingTag(g.name.clone())),
        }
    }
    // Resolve collide_with chains; each pass resolves at least one group or
    // the chain is cyclic.
    loop {
        let pending: Vec<usize> = (0..resolved.len())
            .filter(|&i| resolved[i].is_none())
            .collect();
        if pending.is_empty() {
            break;
        }
        let mut progressed = false;
        for i in pending {
            let g = &script.groups[i];
            let other = index[g.collide_with.as_deref().expect("checked")];
            let Some(target) = resolved[other].clone() else {
                continue;
            };
            let spec = SearchSpec::new(
                g.prefix.clone().unwrap_or_else(|| format!("{}-", g.name)),
                Target::Plain(target),
                g.suffix_len
                    .unwrap_or_else(|| default_suffix_len(scheme.k())),
                *scheme,
            )
            .with_mode(SearchMode::FirstN(1))
            .with_seed(script.seed ^ (i as u64 + 1).wrapping_mul(0xa076_1d64_78bd_642f));
            let found = collider::find_tag_parallel(&spec, rayon::current_num_threads())?;
            let m = found
                .matches
                .into_iter()
                .next()
                .ok_or_else(|| ScenarioError::NoCollision(g.name.clone()))?;
            resolved[i] = Some(m.plain_tag);
            progressed = true;
        }
        if !progressed {
            let stuck = resolved.iter().position(Option::is_none).expect("pending");
            return Err(ScenarioError::CollisionCycle(
                script.groups[stuck].name.clone(),
            ));
        }
    }
    Ok(resolved.into_iter().map(|p| p.expect("resolved")).collect())
}

fn build_policy(
    script: &ScenarioScript,
    plain: &[PlainTag],
    scheme: &TagScheme,
) -> Result<CensorPolicy, ScenarioError> {
    let group_tag = |name: &str| -> Result<&PlainTag, ScenarioError> {
        script
            .groups
            .iter()
            .position(|g| g.name == name)
            .map(|i| &plain[i])
            .ok_or_else(|| ScenarioError::UndefinedGroup(name.to_string()))
    };
    let short_of = |i: usize,
                    group: &Option<String>,
                    tag: &Option<String>|
     -> Result<ShortTag, ScenarioError> {
        match (group, tag) {
            (Some(g), _) => Ok(scheme.short_tag(group_tag(g)?)),
            (None, Some(t)) => Ok(wire::short_tag_from_base32(t, scheme.k())?),
            (None, None) => Err(ScenarioError::RuleTarget(i)),
        }
    };
    let mut rules = Vec::with_capacity(script.rules.len());
    for (i, r) in script.rules.iter().enumerate() {
        rules.push(match r {
            RuleSpec::BlockShortTag { group, tag } => {
                CensorRule::BlockShortTag(short_of(i, group, tag)?)
            }
            RuleSpec::BlockSender { sender } => CensorRule::BlockSender(sender.clone()),
            RuleSpec::WhitelistShortTag { group, tag, known } => {
                let known = known
                    .iter()
                    .map(|n| group_tag(n).cloned())
                    .collect::<Result<Vec<_>, _>>()?;
                CensorRule::whitelist(short_of(i, group, tag)?, &known, scheme)
            }
        });
    }
    Ok(CensorPolicy::new(rules))
}

struct Scheduled {
    time: f64,
    group: usize,
    seq: usize,
}

/// Runs a scenario to completion and reports what the feed saw.
pub fn run_scenario(script: &ScenarioScript) -> Result<FeedStats, ScenarioError> {
    let scheme = TagScheme::fast(script.k)?;
    let params =
        WireParams::new(script.k).with_budget(script.glyph_budget.unwrap_or(DEFAULT_GLYPH_BUDGET));
    let plain = resolve_plain_tags(script, &scheme)?;
    let policy = build_policy(script, &plain, &scheme)?;
    let materials: Vec<_> = plain.iter().map(|p| scheme.derive(p)).collect();
    let capacity = wire::capacity(&params, 1);

    let mut rng = ChaCha20Rng::seed_from_u64(script.seed);
    let mut schedule = Vec::new();
    for (gi, g) in script.groups.iter().enumerate() {
        let exp = Exp::new(g.rate).map_err(|_| ScenarioError::BadRate(g.name.clone()))?;
        let mut t = 0.0;
        for seq in 0..g.messages {
            t += exp.sample(&mut rng);
            schedule.push(Scheduled {
                time: t,
                group: gi,
                seq,
            });
        }
    }
    schedule.sort_by(|a, b| {
        a.time
            .total_cmp(&b.time)
            .then(a.group.cmp(&b.group))
            .then(a.seq.cmp(&b.seq))
    });

    let mut feed = Feed::new(params, policy);
    let mut stats = FeedStats {
        seed: script.seed,
        k: script.k,
        ..FeedStats::default()
    };
    for (g, p) in script.groups.iter().zip(&plain) {
        stats.plain_tags.insert(g.name.clone(), p.to_string());
    }
    let mut accepted_wires = Vec::new();
    for item in &schedule {
        let g = &script.groups[item.group];
        let mut text = format!("{} says {}", g.name, item.seq).into_bytes();
        text.truncate(capacity);
        let hoot = tagcrypt::seal_with(
            &text,
            std::slice::from_ref(&materials[item.group]),
            &mut rng,
        )?;
        let line = wire::encode(&hoot, &params)?;
        let sender = format!("{}-{}", g.name, item.seq % g.senders.max(1));
        let outcome = feed.post(&sender, &line);

        let blocked = matches!(outcome, PostOutcome::Rejected(Rejection::Censored { .. }));
        stats.posts += 1;
        if outcome.is_accepted() {
            stats.accepted += 1;
            accepted_wires.push(line);
        }
        let tag = stats
            .per_tag
            .entry(materials[item.group].short_tag.to_string())
            .or_default();
        tag.posts += 1;
        tag.groups.insert(g.name.clone());
        match g.role {
            Role::Target => {
                tag.target_posts += 1;
                stats.target_posts += 1;
            }
            Role::Cover => {
                tag.cover_posts += 1;
                stats.collateral_posts += 1;
            }
        }
        if blocked {
            tag.blocked += 1;
            stats.blocked += 1;
            match g.role {
                Role::Target => stats.target_blocked += 1,
                Role::Cover => stats.collateral_blocked += 1,
            }
        }
    }

    for _ in 0..script.replays {
        let Some(line) = accepted_wires.choose(&mut rng) else {
            break;
        };
        let sender = format!("replayer-{}", rng.gen_range(0..1000));
        stats.replay_attempts += 1;
        if feed.post(&sender, line) == PostOutcome::Rejected(Rejection::Replay) {
            stats.replays_rejected += 1;
        }
    }

    let mut seen = BTreeSet::new();
    stats.duplicate_copies = feed
        .posts()
        .iter()
        .filter(|p| !seen.insert(p.wire.as_str()))
        .count() as u64;
    Ok(stats)
}

#[cfg(test)]
mod tests {
    use super::*;

    const BASE: &str = r#"
seed = 7
k = 12
replays = 5

[[group]]
name = "pop"
plain_tag = "bieber"
messages = 100
rate = 10.0
senders = 20

[[group]]
name = "org"
role = "target"
collide_with = "pop"
prefix = "free-egypt-"
messages = 10
"#;

    fn run(rules: &str) -> FeedStats {
        let script = ScenarioScript::from_toml(&format!("{BASE}\n{rules}")).unwrap();
        run_scenario(&script).unwrap()
    }

    #[test]
    fn empty_policy_blocks_nothing() {
        let s = run("");
        assert_eq!(s.blocked, 0);
        assert_eq!(s.accepted, 110);
        assert_eq!(s.replays_rejected, 5);
        assert_eq!(s.duplicate_copies, 0);
        assert_eq!(s.per_tag.len(), 1, "groups collide on one tag");
        let tag = s.per_tag.values().next().unwrap();
        assert_eq!(tag.groups.len(), 2);
        assert_eq!(tag.cover_ratio(), Some(10.0));
        assert!(s.plain_tags["org"].starts_with("free-egypt-"));
    }

    #[test]
    fn block_short_tag_is_heavy_handed() {
        let s = run("[[rule]]\nkind = \"block-short-tag\"\ngroup = \"org\"\n");
        assert_eq!(s.target_block_rate(), 1.0);
        assert_eq!(s.collateral_blocked, 100);
    }

    #[test]
    fn whitelist_with_known_cover() {
        let s =
            run("[[rule]]\nkind = \"whitelist-short-tag\"\ngroup = \"org\"\nknown = [\"pop\"]\n");
        assert_eq!(s.target_block_rate(), 1.0);
        assert_eq!(s.collateral_blocked, 0);
    }

    #[test]
    fn block_sender() {
        let s = run("[[rule]]\nkind = \"block-sender\"\nsender = \"org-0\"\n");
        assert_eq!(s.target_blocked, 10);
        assert_eq!(s.collateral_blocked, 0);
    }

    #[test]
    fn deterministic() {
        let a = run("[[rule]]\nkind = \"block-short-tag\"\ngroup = \"pop\"\n");
        let b = run("[[rule]]\nkind = \"block-short-tag\"\ngroup = \"pop\"\n");
        assert_eq!(a, b);
        assert_eq!(a.to_string(), b.to_string());
    }

    #[test]
    fn script_errors() {
        let bad = r#"
seed = 1
k = 12
[[group]]
name = "a"
collide_with = "ghost"
messages = 1
"#;
        let s = ScenarioScript::from_toml(bad).unwrap();
        assert!(matches!(run_scenario(&s), Err(ScenarioError::UndefinedGroup(g)) if g == "ghost"));

        let rule = format!("{BASE}\n[[rule]]\nkind = \"block-short-tag\"\ngroup = \"ghost\"\n");
        let s = ScenarioScript::from_toml(&rule).unwrap();
        assert!(matches!(
            run_scenario(&s),
            Err(ScenarioError::UndefinedGroup(_))
        ));

        let cyc = r#"
seed = 1
k = 12
[[group]]
name = "a"
collide_with = "b"
messages = 1
[[group]]
name = "b"
collide_with = "a"
messages = 1
"#;
        let s = ScenarioScript::from_toml(cyc).unwrap();
        assert!(matches!(
            run_scenario(&s),
            Err(ScenarioError::CollisionCycle(_))
        ));

        let none = "seed = 1\n[[group]]\nname = \"a\"\nmessages = 1\n";
        let s = ScenarioScript::from_toml(none).unwrap();
        assert!(matches!(
            run_scenario(&s),
            Err(ScenarioError::MissingTag(_))
        ));

        assert!(ScenarioScript::from_toml("seed = 1\nbogus = 2\n").is_err());
    }
}
