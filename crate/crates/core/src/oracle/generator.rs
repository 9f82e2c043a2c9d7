use std::collections::BTreeSet;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::models::TabularModel;
use crate::seq::{Sequence, TokenId, Vocabulary};

/// Seeded random tabular distributions that exhibit vote splitting.
///
/// Each model has one short generic sequence (the stem) with weight 1 and
/// several families of long near-duplicates. Every member is
/// `stem + family core + member suffix` with a weight drawn from
/// `[0.4, 0.95]`, so the stem is the single most probable sequence while
/// each family (at least three members) holds more mass than the stem.
/// Weights are normalized by the model.
#[derive(Debug, Clone, PartialEq)]
pub struct NestedPrefixGenerator {
    /// Inclusive range for the number of families.
    pub families: (usize, usize),
    /// Inclusive range for members per family (lower bound at least 3).
    pub members: (usize, usize),
    pub stem_len: (usize, usize),
    pub core_len: (usize, usize),
    pub suffix_len: (usize, usize),
    pub vocab_size: usize,
}

impl Default for NestedPrefixGenerator {
    fn default() -> Self {
        NestedPrefixGenerator {
            families: (2, 4),
            members: (3, 5),
            stem_len: (1, 2),
            core_len: (2, 4),
            suffix_len: (1, 2),
            vocab_size: 12,
        }
    }
}

const MAX_ATTEMPTS: usize = 10_000;

impl NestedPrefixGenerator {
    /// Support size of at most `1 + families.1 * members.1`.
    pub fn max_support(&self) -> usize {
        1 + self.families.1 * self.members.1
    }

    fn validate(&self) -> Result<()> {
        let ranges = [self.families, self.members, self.stem_len, self.core_len, self.suffix_len];
        if ranges.iter().any(|&(lo, hi)| lo == 0 || lo > hi) {
            return Err(Error::invalid("generator ranges must satisfy 1 <= lo <= hi"));
        }
        if self.members.0 < 3 {
            return Err(Error::invalid("families need at least three members"));
        }
        if self.vocab_size < 2 {
            return Err(Error::invalid("generator vocabulary needs at least two tokens"));
        }
        Ok(())
    }

    pub fn vocabulary(&self) -> Vocabulary {
        Vocabulary::new((0..self.vocab_size).map(|i| format!("w{i}"))).expect("distinct generated tokens")
    }

    pub fn generate(&self, seed: u64) -> Result<TabularModel> {
        self.validate()?;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let vocab = self.vocabulary();
        let ids = vocab.regular_ids();
        let draw = |rng: &mut ChaCha8Rng, (lo, hi): (usize, usize)| -> Vec<TokenId> {
            let n = rng.gen_range(lo..=hi);
            (0..n).map(|_| rng.gen_range(ids.clone())).collect()
        };

        let stem = draw(&mut rng, self.stem_len);
        let mut entries = vec![(Sequence::new(stem.clone()), 1.0)];
        let mut seen: BTreeSet<Vec<TokenId>> = BTreeSet::from([stem.clone()]);
        let mut cores: BTreeSet<Vec<TokenId>> = BTreeSet::new();
        let n_families = rng.gen_range(self.families.0..=self.families.1);
        for _ in 0..n_families {
            let core = (0..MAX_ATTEMPTS)
                .map(|_| draw(&mut rng, self.core_len))
                .find(|c| !cores.contains(c))
                .ok_or_else(|| Error::invalid("generator could not find distinct family cores"))?;
            cores.insert(core.clone());
            let n_members = rng.gen_range(self.members.0..=self.members.1);
            let mut added = 0;
            for _ in 0..MAX_ATTEMPTS {
                if added == n_members {
                    break;
                }
                let mut seq = stem.clone();
                seq.extend(&core);
                seq.extend(draw(&mut rng, self.suffix_len));
                if seen.insert(seq.clone()) {
                    entries.push((Sequence::new(seq), rng.gen_range(0.4..=0.95)));
                    added += 1;
                }
            }
            if added < n_members {
                return Err(Error::invalid("generator could not find distinct family members"));
            }
        }
        TabularModel::new(vocab, entries)
    }
}
