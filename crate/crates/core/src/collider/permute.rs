//! Seeded bijection on `0..n` without materialising the domain.
//!
//! A balanced Feistel network permutes `0..2^(2h)` where `2^(2h) >= n`; values
//! that land outside `0..n` are re-encrypted until they fall inside (cycle
//! walking). Since the network is a bijection on the larger domain, the walk
//! restricted to `0..n` is a bijection too. The domain is at most 4x larger
//! than `n`, so the expected walk length is under four rounds.

const ROUNDS: usize = 6;

#[derive(Clone, Debug)]
pub struct IndexPermutation {
    n: u64,
    half_bits: u32,
    keys: [u64; ROUNDS],
}

impl IndexPermutation {
    pub fn new(n: u64, seed: u64) -> Self {
        assert!(n > 0, "empty domain");
        let bits = (64 - (n - 1).leading_zeros()).max(2);
        let half_bits = bits.div_ceil(2);
        let mut state = seed;
        let mut keys = [0u64; ROUNDS];
        for k in &mut keys {
            *k = splitmix64(&mut state);
        }
        IndexPermutation { n, half_bits, keys }
    }

    pub fn len(&self) -> u64 {
        self.n
    }

    pub fn is_empty(&self) -> bool {
        self.n == 0
    }

    /// Image of `i` (which must be `< n`).
    pub fn apply(&self, i: u64) -> u64 {
        debug_assert!(i < self.n);
        let mut x = self.feistel(i);
        while x >= self.n {
            x = self.feistel(x);
        }
        x
    }

    fn feistel(&self, x: u64) -> u64 {
        let mask = (1u64 << self.half_bits) - 1;
        let mut left = x >> self.half_bits;
        let mut right = x & mask;
        for key in &self.keys {
            let mut s = right ^ key;
            let f = splitmix64(&mut s) & mask;
            (left, right) = (right, left ^ f);
        }
        (left << self.half_bits) | right
    }

    pub fn iter(&self) -> impl Iterator<Item = u64> + '_ {
        (0..self.n).map(move |i| self.apply(i))
    }
}

fn splitmix64(state: &mut u64) -> u64 {
    *state = state.wrapping_add(0x9e37_79b9_7f4a_7c15);
    let mut z = *state;
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    proptest! {
        #[test]
        fn is_a_permutation(n in 1u64..5000, seed: u64) {
            let p = IndexPermutation::new(n, seed);
            let mut seen = vec![false; n as usize];
            for x in p.iter() {
                prop_assert!(x < n);
                prop_assert!(!seen[x as usize]);
                seen[x as usize] = true;
            }
        }
    }

    #[test]
    fn seeds_give_different_orders() {
        let a: Vec<u64> = IndexPermutation::new(1000, 1).iter().take(20).collect();
        let b: Vec<u64> = IndexPermutation::new(1000, 2).iter().take(20).collect();
        assert_ne!(a, b);
        let in_order: Vec<u64> = (0..20).collect();
        assert_ne!(a, in_order);
    }

    #[test]
    fn single_element() {
        assert_eq!(
            IndexPermutation::new(1, 9).iter().collect::<Vec<_>>(),
            vec![0]
        );
    }
}
