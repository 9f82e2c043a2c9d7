//! Brute-force references: full enumeration of small distributions, the
//! exact MAP sequence, the exact voting winner over the whole support, and
//! voting on the real line.

mod euclid;
mod generator;

use std::io::Write;

use serde::Serialize;

pub use euclid::{euclidean_vote, uniform_grid, EuclideanKind};
pub use generator::NestedPrefixGenerator;

use crate::decode::{tie_break, CandidateSet, Provenance, ScoredSequence};
use crate::error::{Error, Result};
use crate::models::SequenceModel;
use crate::seq::{Sequence, TokenId, Vocabulary, BOS, EOS};
use crate::voting::{range_vote, Similarity, VoteResult};

pub const DEFAULT_NODE_BUDGET: usize = 1_000_000;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EnumerateOptions {
    pub max_len: usize,
    /// Prefixes and sequences with probability below this are dropped.
    pub prob_floor: f64,
    /// Maximum number of prefix expansions before giving up.
    pub node_budget: usize,
}

impl EnumerateOptions {
    pub fn new(max_len: usize) -> Self {
        EnumerateOptions {
            max_len,
            prob_floor: 0.0,
            node_budget: DEFAULT_NODE_BUDGET,
        }
    }

    pub fn with_floor(mut self, prob_floor: f64) -> Self {
        self.prob_floor = prob_floor;
        self
    }

    pub fn with_budget(mut self, node_budget: usize) -> Self {
        self.node_budget = node_budget;
        self
    }
}

/// Sequences with positive probability, by descending probability with the
/// usual tie-break.
#[derive(Debug, Clone, PartialEq)]
pub struct EnumeratedDistribution {
    pub entries: Vec<ScoredSequence>,
    pub max_len: usize,
}

impl EnumeratedDistribution {
    pub fn covered_mass(&self) -> f64 {
        self.entries.iter().map(|e| e.logprob.exp()).sum()
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn to_candidate_set(&self) -> CandidateSet {
        CandidateSet::new(self.entries.clone(), Provenance::Enumeration { max_len: self.max_len })
    }

    /// One JSON object per line: `{"sequence": "...", "probability": p}`.
    pub fn write_jsonl(&self, vocab: &Vocabulary, mut out: impl Write) -> std::io::Result<()> {
        #[derive(Serialize)]
        struct Line<'a> {
            sequence: &'a str,
            probability: f64,
        }
        for e in &self.entries {
            let text = vocab.detokenize(&e.seq);
            let line = Line {
                sequence: &text,
                probability: e.logprob.exp(),
            };
            serde_json::to_writer(&mut out, &line)?;
            out.write_all(b"\n")?;
        }
        Ok(())
    }
}

/// Depth-first expansion of every prefix up to `max_len` tokens, children in
/// id order. Prefixes whose mass falls below the floor are not expanded; at
/// `max_len` only the end marker is considered. Exact for finite-support
/// models with a zero floor.
pub fn enumerate_distribution<M: SequenceModel + ?Sized>(
    model: &M,
    context: Option<&[TokenId]>,
    opts: &EnumerateOptions,
) -> Result<EnumeratedDistribution> {
    if opts.max_len == 0 {
        return Err(Error::invalid("max_len must be at least 1"));
    }
    if !(opts.prob_floor >= 0.0 && opts.prob_floor.is_finite()) {
        return Err(Error::invalid("probability floor must be finite and non-negative"));
    }
    let mut entries = Vec::new();
    let mut expansions = 0usize;
    let mut stack: Vec<(Vec<TokenId>, f64)> = vec![(Vec::new(), 0.0)];
    while let Some((prefix, lp)) = stack.pop() {
        if expansions == opts.node_budget {
            return Err(Error::Budget { budget: opts.node_budget });
        }
        expansions += 1;
        let lps = model.next_token_logprobs(&prefix, context)?;
        let end = lp + lps[EOS as usize];
        if end > f64::NEG_INFINITY && end.exp() >= opts.prob_floor {
            entries.push(ScoredSequence::new(prefix.clone(), end));
        }
        if prefix.len() >= opts.max_len {
            continue;
        }
        // pushed in reverse so children pop in id order
        for id in (0..lps.len() as TokenId).rev() {
            let child = lp + lps[id as usize];
            if id == BOS || id == EOS || child == f64::NEG_INFINITY || child.exp() < opts.prob_floor {
                continue;
            }
            let mut next = prefix.clone();
            next.push(id);
            stack.push((next, child));
        }
    }
    entries.sort_by(|a, b| tie_break(a.logprob, &a.seq, b.logprob, &b.seq));
    Ok(EnumeratedDistribution {
        entries,
        max_len: opts.max_len,
    })
}

/// The most probable sequence of length at most `max_len`.
pub fn exact_map<M: SequenceModel + ?Sized>(
    model: &M,
    context: Option<&[TokenId]>,
    max_len: usize,
    node_budget: usize,
) -> Result<ScoredSequence> {
    let opts = EnumerateOptions::new(max_len).with_budget(node_budget);
    enumerate_distribution(model, context, &opts)?
        .entries
        .into_iter()
        .next()
        .ok_or(Error::Empty("enumerated support"))
}

/// Range vote with the full enumerated support as both candidates and voters.
pub fn exact_vote<M: SequenceModel + ?Sized>(
    model: &M,
    context: Option<&[TokenId]>,
    sim: &Similarity,
    max_len: usize,
    node_budget: usize,
) -> Result<VoteResult> {
    let opts = EnumerateOptions::new(max_len).with_budget(node_budget);
    let dist = enumerate_distribution(model, context, &opts)?;
    range_vote(&dist.entries, &dist.entries, sim, false)
}

pub fn exact_vote_winner<M: SequenceModel + ?Sized>(
    model: &M,
    context: Option<&[TokenId]>,
    sim: &Similarity,
    max_len: usize,
    node_budget: usize,
) -> Result<ScoredSequence> {
    let vote = exact_vote(model, context, sim, max_len, node_budget)?;
    let w = vote.winner();
    Ok(ScoredSequence {
        seq: Sequence::clone(&w.seq),
        logprob: w.logprob,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::models::{NGramLM, TabularModel};

    fn abcd() -> TabularModel {
        TabularModel::from_texts(&[("a b", 0.5), ("a c", 0.3), ("d", 0.2)], false).unwrap()
    }

    #[test]
    fn tabular_enumeration_is_exact() {
        let m = abcd();
        let d = enumerate_distribution(&m, None, &EnumerateOptions::new(3)).unwrap();
        let texts: Vec<_> = d.entries.iter().map(|e| m.vocab().detokenize(&e.seq)).collect();
        assert_eq!(texts, ["a b", "a c", "d"]);
        assert!((d.covered_mass() - 1.0).abs() < 1e-9);
        assert_eq!(m.vocab().detokenize(&exact_map(&m, None, 3, DEFAULT_NODE_BUDGET).unwrap().seq), "a b");
    }

    #[test]
    fn geometric_chain_is_cut_at_max_len() {
        let m = NGramLM::train_from_texts(&["a"], 1, 0.0, false).unwrap();
        let d = enumerate_distribution(&m, None, &EnumerateOptions::new(3)).unwrap();
        let got: Vec<(String, f64)> = d
            .entries
            .iter()
            .map(|e| (m.vocab().detokenize(&e.seq), e.logprob.exp()))
            .collect();
        let want = [("", 0.5), ("a", 0.25), ("a a", 0.125), ("a a a", 0.0625)];
        assert_eq!(got.len(), 4);
        for ((gs, gp), (ws, wp)) in got.iter().zip(want) {
            assert_eq!(gs, ws);
            assert!((gp - wp).abs() < 1e-12);
        }
    }

    #[test]
    fn high_floor_prunes_everything() {
        let d = enumerate_distribution(&abcd(), None, &EnumerateOptions::new(3).with_floor(0.6)).unwrap();
        assert!(d.is_empty());
        let d = enumerate_distribution(&abcd(), None, &EnumerateOptions::new(3).with_floor(0.4)).unwrap();
        assert_eq!(d.len(), 1);
    }

    #[test]
    fn budget_guard() {
        let m = NGramLM::train_from_texts(&["a b c d e f"], 1, 1.0, false).unwrap();
        let err = enumerate_distribution(&m, None, &EnumerateOptions::new(8).with_budget(1000)).unwrap_err();
        assert!(matches!(err, Error::Budget { budget: 1000 }));
        assert_eq!(err.exit_code(), 4);
    }

    #[test]
    fn point_mass_and_vote_splitting() {
        let m = TabularModel::from_texts(&[("x y", 1.0)], false).unwrap();
        let w = exact_vote_winner(&m, None, &Similarity::Prec(2), 4, DEFAULT_NODE_BUDGET).unwrap();
        assert_eq!(m.vocab().detokenize(&w.seq), "x y");

        let fixture = [
            ("ok", 0.30),
            ("the tall man runs fast", 0.18),
            ("the tall man runs quickly", 0.18),
            ("the tall man is running fast", 0.17),
            ("the tall man sprints", 0.17),
        ];
        let m = TabularModel::from_texts(&fixture, false).unwrap();
        let map = exact_map(&m, None, 8, DEFAULT_NODE_BUDGET).unwrap();
        assert_eq!(m.vocab().detokenize(&map.seq), "ok");
        let vote = exact_vote(&m, None, &Similarity::Overl(1), 8, DEFAULT_NODE_BUDGET).unwrap();
        assert_eq!(m.vocab().detokenize(&vote.winner().seq), "the tall man runs fast");
    }

    #[test]
    fn jsonl_export() {
        let m = abcd();
        let d = enumerate_distribution(&m, None, &EnumerateOptions::new(3)).unwrap();
        let mut buf = Vec::new();
        d.write_jsonl(m.vocab(), &mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let first: serde_json::Value = serde_json::from_str(text.lines().next().unwrap()).unwrap();
        assert_eq!(first["sequence"], "a b");
        assert!((first["probability"].as_f64().unwrap() - 0.5).abs() < 1e-12);
        assert_eq!(text.lines().count(), 3);
    }
}
