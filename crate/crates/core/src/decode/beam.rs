use std::cmp::Ordering;

use serde::{Deserialize, Serialize};

use super::{is_partial_copy, CandidateSet, Provenance, ScoredSequence};
use crate::error::{Error, Result};
use crate::models::SequenceModel;
use crate::seq::{Sequence, TokenId, BOS, EOS};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ScoringMode {
    /// Cumulative log-probability.
    #[default]
    Logprob,
    /// Cumulative log-probability divided by the hypothesis length, where a
    /// finished hypothesis counts its end marker as one position.
    LengthNormalized,
}

impl std::str::FromStr for ScoringMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "logprob" => Ok(ScoringMode::Logprob),
            "length_normalized" | "length-normalized" => Ok(ScoringMode::LengthNormalized),
            other => Err(Error::invalid(format!("unknown scoring mode {other:?}"))),
        }
    }
}

/// Drop finished hypotheses that copy at least `threshold` of the source's
/// distinct unigrams.
#[derive(Debug, Clone, PartialEq)]
pub struct CopyFilter {
    pub source: Sequence,
    pub threshold: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct BeamParams {
    pub beam_size: usize,
    pub max_len: usize,
    pub scoring: ScoringMode,
    /// Rank penalty among siblings; 0 disables diverse decoding.
    pub diverse_gamma: f64,
    pub copy_filter: Option<CopyFilter>,
}

impl BeamParams {
    pub fn new(beam_size: usize, max_len: usize) -> Self {
        BeamParams {
            beam_size,
            max_len,
            scoring: ScoringMode::Logprob,
            diverse_gamma: 0.0,
            copy_filter: None,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.beam_size == 0 {
            return Err(Error::invalid("beam size must be at least 1"));
        }
        if self.max_len == 0 {
            return Err(Error::invalid("max_len must be at least 1"));
        }
        if !(self.diverse_gamma.is_finite() && self.diverse_gamma >= 0.0) {
            return Err(Error::invalid("diverse_gamma must be finite and non-negative"));
        }
        if let Some(f) = &self.copy_filter {
            if !(0.0..=1.0).contains(&f.threshold) {
                return Err(Error::invalid("copy filter threshold must lie in [0, 1]"));
            }
        }
        Ok(())
    }

    fn provenance(&self) -> Provenance {
        Provenance::Beam {
            beam_size: self.beam_size,
            max_len: self.max_len,
            scoring: self.scoring,
            diverse_gamma: self.diverse_gamma,
            copy_threshold: self.copy_filter.as_ref().map(|f| f.threshold),
        }
    }

    fn score(&self, logprob: f64, penalty: f64, len: usize) -> f64 {
        let adjusted = logprob - penalty;
        match self.scoring {
            ScoringMode::Logprob => adjusted,
            ScoringMode::LengthNormalized => adjusted / len as f64,
        }
    }
}

struct Live {
    tokens: Vec<TokenId>,
    logprob: f64,
    penalty: f64,
}

struct Expansion {
    parent: usize,
    token: TokenId,
    logprob: f64,
    penalty: f64,
    score: f64,
}

struct Finished {
    seq: Sequence,
    logprob: f64,
    score: f64,
}

fn rank(a_score: f64, a_lp: f64, a_tokens: &[TokenId], b_score: f64, b_lp: f64, b_tokens: &[TokenId]) -> Ordering {
    b_score
        .total_cmp(&a_score)
        .then_with(|| super::tie_break(a_lp, a_tokens, b_lp, b_tokens))
}

/// Beam search with a finished pool.
///
/// Each step expands every live hypothesis by every outcome of nonzero
/// probability and walks the expansions best-first. End-marker expansions go
/// to the finished pool; the first `beam_size` other expansions become the
/// next live beam. A hypothesis reaching `max_len` tokens is closed with the
/// end marker's model probability. Reported log-probabilities are always the
/// true model values, whatever the scoring mode or penalty.
pub fn beam_search<M: SequenceModel + ?Sized>(
    model: &M,
    context: Option<&[TokenId]>,
    params: &BeamParams,
) -> Result<CandidateSet> {
    params.validate()?;
    let k = params.beam_size;
    let mut live = vec![Live {
        tokens: Vec::new(),
        logprob: 0.0,
        penalty: 0.0,
    }];
    let mut pool: Vec<Finished> = Vec::new();

    while !live.is_empty() {
        let mut expansions: Vec<Expansion> = Vec::new();
        for (pi, hyp) in live.iter().enumerate() {
            let lps = model.next_token_logprobs(&hyp.tokens, context)?;
            let start = expansions.len();
            for (id, &lp) in lps.iter().enumerate() {
                let id = id as TokenId;
                if id == BOS || lp == f64::NEG_INFINITY {
                    continue;
                }
                let logprob = hyp.logprob + lp;
                expansions.push(Expansion {
                    parent: pi,
                    token: id,
                    logprob,
                    penalty: hyp.penalty,
                    score: params.score(logprob, hyp.penalty, hyp.tokens.len() + 1),
                });
            }
            if params.diverse_gamma > 0.0 {
                let siblings = &mut expansions[start..];
                siblings.sort_by(|a, b| cmp_expansions(&live, a, b));
                for (r, e) in siblings.iter_mut().enumerate() {
                    e.penalty += params.diverse_gamma * r as f64;
                    e.score = params.score(e.logprob, e.penalty, hyp.tokens.len() + 1);
                }
            }
        }
        expansions.sort_by(|a, b| cmp_expansions(&live, a, b));

        let mut next_live: Vec<Live> = Vec::new();
        let mut taken = 0;
        for e in expansions {
            if taken == k {
                break;
            }
            let parent = &live[e.parent];
            if e.token == EOS {
                offer(&mut pool, params, Finished {
                    seq: Sequence::from(parent.tokens.as_slice()),
                    logprob: e.logprob,
                    score: e.score,
                });
                continue;
            }
            taken += 1;
            let mut tokens = parent.tokens.clone();
            tokens.push(e.token);
            if tokens.len() >= params.max_len {
                let eos = model.next_token_logprobs(&tokens, context)?[EOS as usize];
                if eos > f64::NEG_INFINITY {
                    let logprob = e.logprob + eos;
                    offer(&mut pool, params, Finished {
                        score: params.score(logprob, e.penalty, tokens.len() + 1),
                        seq: Sequence::new(tokens),
                        logprob,
                    });
                }
            } else {
                next_live.push(Live {
                    tokens,
                    logprob: e.logprob,
                    penalty: e.penalty,
                });
            }
        }
        live = next_live;

        // Per-step log-probabilities are <= 0, so under plain log-probability
        // scoring no descendant can beat its ancestor's current score.
        if params.scoring == ScoringMode::Logprob && pool.len() >= k {
            let worst = pool[pool.len() - 1].score;
            if live.iter().all(|h| h.logprob - h.penalty < worst) {
                break;
            }
        }
    }

    let items = pool
        .into_iter()
        .map(|f| ScoredSequence {
            seq: f.seq,
            logprob: f.logprob,
        })
        .collect();
    Ok(CandidateSet::new(items, params.provenance()))
}

fn cmp_expansions(live: &[Live], a: &Expansion, b: &Expansion) -> Ordering {
    let path = |e: &Expansion| {
        let last = (e.token != EOS).then_some(e.token);
        live[e.parent].tokens.iter().copied().chain(last)
    };
    b.score
        .total_cmp(&a.score)
        .then_with(|| b.logprob.total_cmp(&a.logprob))
        .then_with(|| path(a).cmp(path(b)))
}

fn offer(pool: &mut Vec<Finished>, params: &BeamParams, f: Finished) {
    if let Some(filter) = &params.copy_filter {
        if is_partial_copy(&f.seq, &filter.source, filter.threshold) {
            return;
        }
    }
    let pos = pool
        .binary_search_by(|p| rank(p.score, p.logprob, &p.seq, f.score, f.logprob, &f.seq))
        .unwrap_or_else(|e| e);
    if pos < params.beam_size {
        pool.insert(pos, f);
        pool.truncate(params.beam_size);
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::models::{sequence_logprob, NGramLM, TabularModel};

    fn abcd() -> TabularModel {
        TabularModel::from_texts(&[("a b", 0.5), ("a c", 0.3), ("d", 0.2)], false).unwrap()
    }

    fn texts(m: &TabularModel, set: &CandidateSet) -> Vec<String> {
        set.iter().map(|s| m.vocab().detokenize(&s.seq)).collect()
    }

    #[test]
    fn beam_examples_on_three_sequence_support() {
        let m = abcd();
        let run = |k| beam_search(&m, None, &BeamParams::new(k, 3)).unwrap();
        assert_eq!(texts(&m, &run(2)), ["a b", "a c"]);
        assert_eq!(texts(&m, &run(1)), ["a b"]);
        let all = run(3);
        assert_eq!(texts(&m, &all), ["a b", "a c", "d"]);
        for (s, p) in all.iter().zip([0.5f64, 0.3, 0.2]) {
            assert!((s.logprob - p.ln()).abs() < 1e-12);
        }
        assert_eq!(texts(&m, &run(10)).len(), 3);
    }

    #[test]
    fn length_normalization_prefers_longer_output() {
        let m = TabularModel::from_texts(&[("x", 0.4), ("y y y", 0.35), ("y y z", 0.25)], false).unwrap();
        let mut params = BeamParams::new(3, 5);
        assert_eq!(texts(&m, &beam_search(&m, None, &params).unwrap())[0], "x");
        params.scoring = ScoringMode::LengthNormalized;
        let out = beam_search(&m, None, &params).unwrap();
        assert_eq!(texts(&m, &out)[0], "y y y");
        for s in out.iter() {
            assert!((s.logprob - sequence_logprob(&m, &s.seq, None).unwrap()).abs() < 1e-12);
        }
    }

    #[test]
    fn sibling_rank_penalty_diversifies_parents() {
        let m = TabularModel::from_texts(
            &[("a b", 0.3), ("a c", 0.25), ("a h", 0.2), ("d e", 0.15), ("f g", 0.1)],
            false,
        )
        .unwrap();
        let mut params = BeamParams::new(3, 4);
        assert_eq!(texts(&m, &beam_search(&m, None, &params).unwrap()), ["a b", "a c", "a h"]);
        params.diverse_gamma = 1.0;
        let out = beam_search(&m, None, &params).unwrap();
        assert_eq!(texts(&m, &out), ["a b", "a c", "d e"]);
        for s in out.iter() {
            assert!((s.logprob - sequence_logprob(&m, &s.seq, None).unwrap()).abs() < 1e-12);
        }
    }

    #[test]
    fn copy_filter_drops_finished_copies() {
        let m = abcd();
        let mut params = BeamParams::new(3, 3);
        params.copy_filter = Some(CopyFilter {
            source: m.vocab().tokenize("a b", false),
            threshold: 0.5,
        });
        assert_eq!(texts(&m, &beam_search(&m, None, &params).unwrap()), ["d"]);
    }

    #[test]
    fn max_len_forces_termination_with_true_probability() {
        let m = NGramLM::train_from_texts(&["a"], 1, 0.0, false).unwrap();
        let out = beam_search(&m, None, &BeamParams::new(3, 2)).unwrap();
        let got: Vec<(usize, f64)> = out.iter().map(|s| (s.seq.len(), s.logprob.exp())).collect();
        assert_eq!(got.len(), 3);
        for ((len, p), (want_len, want_p)) in got.iter().zip([(0, 0.5), (1, 0.25), (2, 0.125)]) {
            assert_eq!(*len, want_len);
            assert!((p - want_p).abs() < 1e-12);
        }
    }

    #[test]
    fn invalid_params_rejected() {
        let m = abcd();
        assert!(beam_search(&m, None, &BeamParams::new(0, 3)).is_err());
        assert!(beam_search(&m, None, &BeamParams::new(1, 0)).is_err());
        let mut p = BeamParams::new(1, 3);
        p.diverse_gamma = -1.0;
        assert!(beam_search(&m, None, &p).is_err());
    }
}
