//! Censorship-resistant group messaging over a public microblog.
//!
//! Groups share a secret hashtag (a *plain tag*). Everything a group needs is
//! derived from it: a short, deliberately collision-prone public hashtag used
//! to find the group's messages, and a tag key that unlocks the per-message
//! session keys. Because short tags collide, every search for a group's tag
//! also returns unrelated traffic, and a censor who blocks the tag blocks the
//! innocent groups that share it.
//!
//! * [`tagcrypt`] derives tags and keys and seals/opens hoots.
//! * [`wire`] renders hoots as 140-glyph hashtag lines and parses them back.
//! * [`collider`] searches for plain tags that collide with a chosen target.
//! * [`feed`] is an in-memory microblog with replay rejection and censors.
//! * [`analysis`] holds the entropy, collision and bandwidth arithmetic and
//!   the corpus-based anonymity statistics.
//! * [`throughput`] measures seal and open rates.

pub mod analysis;
pub mod collider;
pub mod feed;
pub mod tagcrypt;
pub mod throughput;
pub mod wire;

pub use tagcrypt::{
    derive_long_tag, open, seal, split_tag, Hoot, KdfConfig, KdfMode, LongTag, PlainTag,
    ScryptCost, ShortTag, TagError, TagMaterial, TagScheme,
};
pub use wire::{capacity, encode, parse, WireError, WireMessage, WireParams};
