//! Range voting over candidate sequences.
//!
//! Every voter `v` gives every candidate `c` a score `sim(v, c)` in `[0, 1]`
//! weighted by its model probability `P(v)`; the candidate with the highest
//! total wins. Splitting a voter into clones with the same total weight
//! leaves every score unchanged, so near-duplicate candidates do not split
//! the vote the way they split probability mass.

mod similarity;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

pub use similarity::{
    bleu_sim, embed_cosine_sim, overl_sim, prec_sim, Similarity, SimilarityKind, SimilaritySpec, TokenVectors,
};

use crate::decode::{beam_search, sample_sequences, tie_break, BeamParams, CandidateSet, SamplingStrategy, ScoredSequence};
use crate::error::{Error, Result};
use crate::models::SequenceModel;
use crate::seq::{Sequence, TokenId};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RankedCandidate {
    /// Position in the candidate set passed to [`range_vote`].
    pub index: usize,
    pub seq: Sequence,
    pub logprob: f64,
    pub score: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct VoteResult {
    /// Candidates by descending score.
    pub ranked: Vec<RankedCandidate>,
    /// `contributions[i][j] = P(voter j) · sim(voter j, candidate i)` in
    /// candidate-set order, when requested.
    pub contributions: Option<Vec<Vec<f64>>>,
}

impl VoteResult {
    pub fn winner(&self) -> &RankedCandidate {
        &self.ranked[0]
    }
}

/// Scores every candidate by `Σ_v P(v) · sim(v, c)`.
///
/// Weights are computed as `exp(logprob - max)` and the sums rescaled by
/// `exp(max)` at the end. Each candidate's sum runs over voters in their
/// given order, so results do not depend on the thread count. Ties in score
/// go to the higher log-probability, then the smaller token list.
pub fn range_vote(
    candidates: &[ScoredSequence],
    voters: &[ScoredSequence],
    sim: &Similarity,
    keep_contributions: bool,
) -> Result<VoteResult> {
    if candidates.is_empty() {
        return Err(Error::Empty("candidate set"));
    }
    if voters.is_empty() {
        return Err(Error::Empty("voter set"));
    }
    if let Some(bad) = voters.iter().chain(candidates).find(|s| s.logprob.is_nan() || s.logprob == f64::INFINITY) {
        return Err(Error::invalid(format!("invalid log-probability {}", bad.logprob)));
    }
    let max_lp = voters.iter().map(|v| v.logprob).fold(f64::NEG_INFINITY, f64::max);
    let (weights, scale): (Vec<f64>, f64) = if max_lp == f64::NEG_INFINITY {
        (vec![0.0; voters.len()], 0.0)
    } else {
        (voters.iter().map(|v| (v.logprob - max_lp).exp()).collect(), max_lp.exp())
    };
    let voter_profiles: Vec<_> = voters.par_iter().map(|v| sim.profile(&v.seq)).collect();
    let rows: Vec<(f64, Option<Vec<f64>>)> = candidates
        .par_iter()
        .map(|c| {
            let cp = sim.profile(&c.seq);
            let mut total = 0.0;
            let mut row = keep_contributions.then(|| Vec::with_capacity(voters.len()));
            for (vp, &w) in voter_profiles.iter().zip(&weights) {
                let x = if w == 0.0 { 0.0 } else { w * sim.score_profiles(vp, &cp) };
                total += x;
                if let Some(row) = row.as_mut() {
                    row.push(x * scale);
                }
            }
            (total * scale, row)
        })
        .collect();
    let mut ranked: Vec<RankedCandidate> = candidates
        .iter()
        .zip(&rows)
        .enumerate()
        .map(|(index, (c, (score, _)))| RankedCandidate {
            index,
            seq: c.seq.clone(),
            logprob: c.logprob,
            score: *score,
        })
        .collect();
    ranked.sort_by(|a, b| {
        b.score
            .total_cmp(&a.score)
            .then_with(|| tie_break(a.logprob, &a.seq, b.logprob, &b.seq))
            .then(a.index.cmp(&b.index))
    });
    let contributions = keep_contributions.then(|| rows.into_iter().map(|(_, r)| r.unwrap_or_default()).collect());
    Ok(VoteResult { ranked, contributions })
}

/// Where the voters come from in [`select_representative`].
#[derive(Debug, Clone, PartialEq)]
pub enum VoterSource {
    /// The (possibly copy-filtered) candidates vote for each other.
    SameAsCandidates,
    Beam(BeamParams),
    Sample {
        count: usize,
        strategy: SamplingStrategy,
        seed: u64,
        max_len: usize,
    },
    Fixed(CandidateSet),
}

impl VoterSource {
    pub fn generate<M: SequenceModel + ?Sized>(
        &self,
        model: &M,
        context: Option<&[TokenId]>,
        candidates: &CandidateSet,
    ) -> Result<CandidateSet> {
        match self {
            VoterSource::SameAsCandidates => Ok(candidates.clone()),
            VoterSource::Beam(params) => beam_search(model, context, params),
            VoterSource::Sample {
                count,
                strategy,
                seed,
                max_len,
            } => sample_sequences(model, context, *count, *strategy, *seed, *max_len),
            VoterSource::Fixed(set) => Ok(set.clone()),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Selection {
    pub winner: ScoredSequence,
    pub candidates: CandidateSet,
    pub voters: CandidateSet,
    pub vote: VoteResult,
}

/// Beam search for candidates, voter generation, then a range vote.
pub fn select_representative<M: SequenceModel + ?Sized>(
    model: &M,
    context: Option<&[TokenId]>,
    decode: &BeamParams,
    voters: &VoterSource,
    sim: &Similarity,
    keep_contributions: bool,
) -> Result<Selection> {
    let candidates = beam_search(model, context, decode)?;
    if candidates.is_empty() {
        return Err(Error::Empty("candidate set after copy filtering"));
    }
    let voter_set = voters.generate(model, context, &candidates)?;
    let vote = range_vote(&candidates, &voter_set, sim, keep_contributions)?;
    let w = vote.winner();
    Ok(Selection {
        winner: ScoredSequence::new(w.seq.clone(), w.logprob),
        candidates,
        voters: voter_set,
        vote,
    })
}
