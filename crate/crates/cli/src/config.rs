//! Defaults file and the effective configuration each command runs with.
//!
//! ```toml
//! k = 24
//! glyph_budget = 140
//! kdf = "memory-hard"     # or "fast"
//! seed = 7                # optional; makes seal/collide/simulate reproducible
//! shards = 8
//!
//! [scrypt]
//! log_n = 15
//! r = 8
//! p = 1
//! ```
//!
//! Command-line flags override the file; the file overrides built-in
//! defaults. `kdf` applies to seal and open only; collide, analyze and bench
//! default to fast-hash unless `--kdf` is given.

use std::path::Path;

use clap::ValueEnum;
use h00t::tagcrypt::{KdfConfig, ScryptCost, DEFAULT_K};
use h00t::wire::DEFAULT_GLYPH_BUDGET;
use serde::{Deserialize, Serialize};

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum KdfChoice {
    Fast,
    MemoryHard,
}

#[derive(Clone, Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FileConfig {
    pub k: Option<u32>,
    pub glyph_budget: Option<usize>,
    pub kdf: Option<KdfChoice>,
    pub seed: Option<u64>,
    pub shards: Option<usize>,
    pub scrypt: Option<ScryptCost>,
}

impl FileConfig {
    pub fn load(path: &Path) -> Result<Self, String> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| format!("cannot read config {}: {e}", path.display()))?;
        toml::from_str(&text).map_err(|e| format!("config {}: {e}", path.display()))
    }

    pub fn k(&self, flag: Option<u32>) -> u32 {
        flag.or(self.k).unwrap_or(DEFAULT_K)
    }

    pub fn glyph_budget(&self, flag: Option<usize>) -> usize {
        flag.or(self.glyph_budget).unwrap_or(DEFAULT_GLYPH_BUDGET)
    }

    pub fn seed(&self, flag: Option<u64>) -> Option<u64> {
        flag.or(self.seed)
    }

    /// `fallback` is the command's own default when neither the flag nor
    /// (for protocol commands) the file names a mode.
    pub fn kdf(&self, flag: &KdfFlags, use_file: bool, fallback: KdfChoice, k: u32) -> KdfConfig {
        let choice = flag
            .kdf
            .or(if use_file { self.kdf } else { None })
            .unwrap_or(fallback);
        let base = self.scrypt.unwrap_or_default();
        let cost = ScryptCost {
            log_n: flag.scrypt_log_n.unwrap_or(base.log_n),
            r: flag.scrypt_r.unwrap_or(base.r),
            p: flag.scrypt_p.unwrap_or(base.p),
        };
        let cfg = match choice {
            KdfChoice::Fast => KdfConfig::fast_hash(),
            KdfChoice::MemoryHard => KdfConfig::memory_hard(cost),
        };
        cfg.sized_for(k)
    }
}

#[derive(Clone, Debug, Default, clap::Args)]
pub struct KdfFlags {
    /// Long-tag derivation.
    #[arg(long, value_enum)]
    pub kdf: Option<KdfChoice>,
    /// scrypt work factor as log2(N).
    #[arg(long)]
    pub scrypt_log_n: Option<u8>,
    #[arg(long)]
    pub scrypt_r: Option<u32>,
    #[arg(long)]
    pub scrypt_p: Option<u32>,
}

/// Logged once per run.
#[derive(Debug, Serialize)]
pub struct Effective<'a> {
    pub command: &'a str,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub k: Option<u32>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub kdf: Option<KdfConfig>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub glyph_budget: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    #[serde(flatten)]
    pub extra: serde_json::Map<String, serde_json::Value>,
}

impl<'a> Effective<'a> {
    pub fn new(command: &'a str) -> Self {
        Effective {
            command,
            k: None,
            kdf: None,
            glyph_budget: None,
            seed: None,
            extra: Default::default(),
        }
    }

    pub fn with(mut self, key: &str, value: impl Serialize) -> Self {
        self.extra.insert(
            key.into(),
            serde_json::to_value(value).expect("serializable"),
        );
        self
    }

    pub fn log(&self) {
        log::info!(
            "effective config: {}",
            serde_json::to_string(self).expect("serializable")
        );
    }
}
