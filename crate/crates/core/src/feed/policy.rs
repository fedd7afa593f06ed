use crate::tagcrypt::{Hoot, PlainTag, ShortTag, TagMaterial, TagScheme};

/// One censor rule. Rules are tried in order and the first that fires
/// decides.
#[derive(Clone, Debug)]
pub enum CensorRule {
    /// Drop every post carrying this short tag.
    BlockShortTag(ShortTag),
    BlockSender(String),
    /// Drop posts carrying this short tag unless one of the censor's known
    /// plain tags opens them.
    WhitelistShortTag {
        tag: ShortTag,
        known: Vec<TagMaterial>,
    },
}

impl CensorRule {
    /// Whitelist `tag`, deriving the known plain tags once up front.
    pub fn whitelist(tag: ShortTag, known: &[PlainTag], scheme: &TagScheme) -> Self {
        CensorRule::WhitelistShortTag {
            tag,
            known: known.iter().map(|p| scheme.derive(p)).collect(),
        }
    }

    fn fires(&self, sender: &str, hoot: &Hoot) -> bool {
        match self {
            CensorRule::BlockShortTag(tag) => hoot.short_tags().contains(tag),
            CensorRule::BlockSender(s) => s == sender,
            CensorRule::WhitelistShortTag { tag, known } => {
                hoot.short_tags().contains(tag)
                    && !known.iter().any(|m| m.recover_keys(hoot).is_some())
            }
        }
    }
}

#[derive(Clone, Debug, Default)]
pub struct CensorPolicy {
    pub rules: Vec<CensorRule>,
}

impl CensorPolicy {
    pub fn new(rules: Vec<CensorRule>) -> Self {
        CensorPolicy { rules }
    }

    /// Index of the first rule that blocks this post.
    pub fn evaluate(&self, sender: &str, hoot: &Hoot) -> Option<usize> {
        self.rules.iter().position(|r| r.fires(sender, hoot))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::tagcrypt::seal;
    use rand::SeedableRng;
    use rand_chacha::ChaCha20Rng;

    #[test]
    fn first_matching_rule_wins() {
        let scheme = TagScheme::fast(24).unwrap();
        let mut rng = ChaCha20Rng::seed_from_u64(1);
        let t = PlainTag::new("g").unwrap();
        let st = scheme.short_tag(&t);
        let hoot = seal(b"x", std::slice::from_ref(&t), &scheme, &mut rng).unwrap();
        let policy = CensorPolicy::new(vec![
            CensorRule::BlockSender("eve".into()),
            CensorRule::BlockShortTag(st),
            CensorRule::BlockSender("alice".into()),
        ]);
        assert_eq!(policy.evaluate("alice", &hoot), Some(1));
        assert_eq!(policy.evaluate("eve", &hoot), Some(0));
        assert_eq!(CensorPolicy::default().evaluate("eve", &hoot), None);
    }

    #[test]
    fn whitelist_passes_known_groups_only() {
        let scheme = TagScheme::fast(24).unwrap();
        let mut rng = ChaCha20Rng::seed_from_u64(2);
        let known = PlainTag::new("popstar").unwrap();
        let st = scheme.short_tag(&known);
        let rule = CensorRule::whitelist(st, std::slice::from_ref(&known), &scheme);
        let ok = seal(b"fan mail", &[known], &scheme, &mut rng).unwrap();
        assert!(!rule.fires("x", &ok));
        // A different group forced onto the same short tag.
        let mut foreign = scheme.derive(&PlainTag::new("secret").unwrap());
        foreign.short_tag = st;
        let hidden = crate::tagcrypt::seal_with(b"plans", &[foreign], &mut rng).unwrap();
        assert!(rule.fires("x", &hidden));
        // Untouched tags pass.
        let other = seal(
            b"hi",
            &[PlainTag::new("elsewhere").unwrap()],
            &scheme,
            &mut rng,
        )
        .unwrap();
        assert!(!rule.fires("x", &other));
    }
}
