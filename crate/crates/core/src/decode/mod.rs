//! Candidate and voter generation.

mod beam;
mod copies;
mod sample;

use std::cmp::Ordering;
use std::ops::Deref;

use serde::{Deserialize, Serialize};

pub use beam::{beam_search, BeamParams, CopyFilter, ScoringMode};
pub use copies::{filter_copies, is_partial_copy, unigram_overlap_rate};
pub use sample::{sample_sequences, SamplingStrategy};

use crate::seq::Sequence;

/// A sequence with its model log-probability (end marker included).
#[derive(Debug, Clone, PartialEq)]
pub struct ScoredSequence {
    pub seq: Sequence,
    pub logprob: f64,
}

impl ScoredSequence {
    pub fn new(seq: impl Into<Sequence>, logprob: f64) -> Self {
        ScoredSequence {
            seq: seq.into(),
            logprob,
        }
    }
}

/// The ordering used to break ties everywhere: higher log-probability first,
/// then the lexicographically smaller token list.
pub fn tie_break(a_logprob: f64, a_seq: &[u32], b_logprob: f64, b_seq: &[u32]) -> Ordering {
    b_logprob.total_cmp(&a_logprob).then_with(|| a_seq.cmp(b_seq))
}

/// How a candidate set was produced.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "strategy", rename_all = "snake_case")]
pub enum Provenance {
    Beam {
        beam_size: usize,
        max_len: usize,
        scoring: ScoringMode,
        diverse_gamma: f64,
        copy_threshold: Option<f64>,
    },
    Sampling {
        sampler: SamplingStrategy,
        count: usize,
        seed: u64,
        max_len: usize,
    },
    Enumeration {
        max_len: usize,
    },
    Filtered {
        threshold: f64,
        from: Box<Provenance>,
    },
    External,
}

/// Output of a generation strategy. Beam-search sets are sorted by search
/// score and free of duplicates; sampled sets keep draw order and repeats.
#[derive(Debug, Clone, PartialEq)]
pub struct CandidateSet {
    pub items: Vec<ScoredSequence>,
    pub provenance: Provenance,
}

impl CandidateSet {
    pub fn new(items: Vec<ScoredSequence>, provenance: Provenance) -> Self {
        CandidateSet { items, provenance }
    }

    pub fn external(items: Vec<ScoredSequence>) -> Self {
        Self::new(items, Provenance::External)
    }

    /// Sum of `exp(logprob)` over the items.
    pub fn total_mass(&self) -> f64 {
        self.items.iter().map(|s| s.logprob.exp()).sum()
    }

    pub fn top(&self) -> Option<&ScoredSequence> {
        self.items.first()
    }
}

impl Deref for CandidateSet {
    type Target = [ScoredSequence];

    fn deref(&self) -> &[ScoredSequence] {
        &self.items
    }
}
