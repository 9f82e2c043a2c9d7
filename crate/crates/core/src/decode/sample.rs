use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{CandidateSet, Provenance, ScoredSequence};
use crate::error::{Error, Result};
use crate::models::SequenceModel;
use crate::seq::{Sequence, TokenId, BOS, EOS};

/// Per-step truncation applied before drawing the next token.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum SamplingStrategy {
    Ancestral,
    TopK { k: usize },
    Nucleus { p: f64 },
}

impl SamplingStrategy {
    pub fn validate(&self) -> Result<()> {
        match *self {
            SamplingStrategy::TopK { k: 0 } => Err(Error::invalid("top-k sampling needs k >= 1")),
            SamplingStrategy::Nucleus { p } if !(p > 0.0 && p <= 1.0) => {
                Err(Error::invalid(format!("nucleus mass must lie in (0, 1], got {p}")))
            }
            _ => Ok(()),
        }
    }

    /// Number of leading outcomes (sorted by descending probability) kept.
    fn keep(&self, sorted: &[(TokenId, f64)]) -> usize {
        match *self {
            SamplingStrategy::Ancestral => sorted.len(),
            SamplingStrategy::TopK { k } => k.min(sorted.len()),
            SamplingStrategy::Nucleus { p } if p >= 1.0 => sorted.len(),
            SamplingStrategy::Nucleus { p } => {
                let mut cum = 0.0;
                for (i, (_, q)) in sorted.iter().enumerate() {
                    cum += q;
                    if cum >= p {
                        return i + 1;
                    }
                }
                sorted.len()
            }
        }
    }
}

impl std::str::FromStr for SamplingStrategy {
    type Err = Error;

    /// `ancestral`, `top_k:K`, or `nucleus:P`.
    fn from_str(s: &str) -> Result<Self> {
        let (kind, arg) = s.split_once(':').unwrap_or((s, ""));
        let bad = || Error::invalid(format!("invalid sampling strategy {s:?}"));
        let strategy = match kind {
            "ancestral" if arg.is_empty() => SamplingStrategy::Ancestral,
            "top_k" | "top-k" => SamplingStrategy::TopK {
                k: arg.parse().map_err(|_| bad())?,
            },
            "nucleus" | "top_p" | "top-p" => SamplingStrategy::Nucleus {
                p: arg.parse().map_err(|_| bad())?,
            },
            _ => return Err(bad()),
        };
        strategy.validate()?;
        Ok(strategy)
    }
}

/// Draws `count` independent sequences. Every step sorts the outcomes by
/// descending probability (ties by id), truncates per `strategy`, and inverts
/// one uniform draw over the kept mass, so a no-op truncation consumes the
/// generator exactly like ancestral sampling. Sequences reaching `max_len`
/// tokens are closed with the end marker. Stored log-probabilities are the
/// untruncated model values.
pub fn sample_sequences<M: SequenceModel + ?Sized>(
    model: &M,
    context: Option<&[TokenId]>,
    count: usize,
    strategy: SamplingStrategy,
    seed: u64,
    max_len: usize,
) -> Result<CandidateSet> {
    if count == 0 {
        return Err(Error::invalid("sample count must be at least 1"));
    }
    if max_len == 0 {
        return Err(Error::invalid("max_len must be at least 1"));
    }
    strategy.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut items = Vec::with_capacity(count);
    let mut outcomes: Vec<(TokenId, f64)> = Vec::new();
    for _ in 0..count {
        let mut tokens: Vec<TokenId> = Vec::new();
        let mut logprob = 0.0;
        loop {
            let lps = model.next_token_logprobs(&tokens, context)?;
            if tokens.len() >= max_len {
                logprob += lps[EOS as usize];
                break;
            }
            outcomes.clear();
            outcomes.extend(
                lps.iter()
                    .enumerate()
                    .filter(|&(id, &lp)| id as TokenId != BOS && lp > f64::NEG_INFINITY)
                    .map(|(id, &lp)| (id as TokenId, lp.exp())),
            );
            if outcomes.is_empty() {
                return Err(Error::ZeroMass { prefix: tokens });
            }
            outcomes.sort_by(|a, b| b.1.total_cmp(&a.1).then(a.0.cmp(&b.0)));
            let kept = &outcomes[..strategy.keep(&outcomes)];
            let total: f64 = kept.iter().map(|(_, q)| q).sum();
            let u = rng.gen::<f64>() * total;
            let mut cum = 0.0;
            let mut choice = kept[kept.len() - 1].0;
            for &(id, q) in kept {
                cum += q;
                if u < cum {
                    choice = id;
                    break;
                }
            }
            logprob += lps[choice as usize];
            if choice == EOS {
                break;
            }
            tokens.push(choice);
        }
        items.push(ScoredSequence {
            seq: Sequence::new(tokens),
            logprob,
        });
    }
    Ok(CandidateSet::new(items, Provenance::Sampling {
        sampler: strategy,
        count,
        seed,
        max_len,
    }))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::models::TabularModel;

    fn abcd() -> TabularModel {
        TabularModel::from_texts(&[("a b", 0.5), ("a c", 0.3), ("d", 0.2)], false).unwrap()
    }

    #[test]
    fn parse_strategies() {
        assert_eq!("ancestral".parse::<SamplingStrategy>().unwrap(), SamplingStrategy::Ancestral);
        assert_eq!("top_k:5".parse::<SamplingStrategy>().unwrap(), SamplingStrategy::TopK { k: 5 });
        assert_eq!("nucleus:0.9".parse::<SamplingStrategy>().unwrap(), SamplingStrategy::Nucleus { p: 0.9 });
        assert!("top_k:0".parse::<SamplingStrategy>().is_err());
        assert!("nucleus:0".parse::<SamplingStrategy>().is_err());
        assert!("nucleus:1.5".parse::<SamplingStrategy>().is_err());
        assert!("greedy".parse::<SamplingStrategy>().is_err());
    }

    #[test]
    fn ancestral_frequency_matches_mass() {
        let m = abcd();
        let ab = m.vocab().tokenize("a b", false);
        let draws = sample_sequences(&m, None, 10_000, SamplingStrategy::Ancestral, 7, 5).unwrap();
        let freq = draws.iter().filter(|s| s.seq == ab).count() as f64 / 10_000.0;
        // 4 standard deviations of a Bernoulli(0.5) mean over 10k draws
        assert!((freq - 0.5).abs() <= 0.02, "freq {freq}");
    }

    #[test]
    fn no_op_truncations_match_ancestral() {
        let m = abcd();
        let n = m.vocab().len();
        let base = sample_sequences(&m, None, 200, SamplingStrategy::Ancestral, 11, 5).unwrap();
        let topk = sample_sequences(&m, None, 200, SamplingStrategy::TopK { k: n }, 11, 5).unwrap();
        let nucleus = sample_sequences(&m, None, 200, SamplingStrategy::Nucleus { p: 1.0 }, 11, 5).unwrap();
        assert_eq!(base.items, topk.items);
        assert_eq!(base.items, nucleus.items);
    }

    #[test]
    fn top1_is_greedy_and_logprob_is_untruncated() {
        let m = abcd();
        let ab = m.vocab().tokenize("a b", false);
        let draws = sample_sequences(&m, None, 20, SamplingStrategy::TopK { k: 1 }, 3, 5).unwrap();
        for s in draws.iter() {
            assert_eq!(s.seq, ab);
            assert!((s.logprob - 0.5f64.ln()).abs() < 1e-12);
        }
    }

    #[test]
    fn nucleus_keeps_smallest_covering_prefix() {
        let sorted = [(3, 0.5), (4, 0.3), (5, 0.2)];
        assert_eq!(SamplingStrategy::Nucleus { p: 0.5 }.keep(&sorted), 1);
        assert_eq!(SamplingStrategy::Nucleus { p: 0.6 }.keep(&sorted), 2);
        assert_eq!(SamplingStrategy::Nucleus { p: 0.95 }.keep(&sorted), 3);
    }

    #[test]
    fn deterministic_given_seed_and_forced_termination() {
        let m = crate::models::NGramLM::train_from_texts(&["a a a a a a"], 1, 0.0, false).unwrap();
        let x = sample_sequences(&m, None, 50, SamplingStrategy::Ancestral, 5, 3).unwrap();
        let y = sample_sequences(&m, None, 50, SamplingStrategy::Ancestral, 5, 3).unwrap();
        assert_eq!(x, y);
        assert!(x.iter().all(|s| s.seq.len() <= 3 && s.logprob <= 0.0));
    }

    #[test]
    fn invalid_parameters() {
        let m = abcd();
        assert!(sample_sequences(&m, None, 0, SamplingStrategy::Ancestral, 0, 5).is_err());
        assert!(sample_sequences(&m, None, 1, SamplingStrategy::Ancestral, 0, 0).is_err());
        assert!(sample_sequences(&m, None, 1, SamplingStrategy::TopK { k: 0 }, 0, 5).is_err());
    }
}
