//! Sentence- and corpus-level BLEU over token ids.

use crate::error::{Error, Result};
use crate::seq::{ngram_bag, NGramBag, Sequence, TokenId};

/// Sufficient statistics for BLEU: clipped matches and hypothesis n-gram
/// totals for each order, plus hypothesis and effective reference lengths.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BleuStats {
    pub matches: Vec<usize>,
    pub totals: Vec<usize>,
    pub hyp_len: usize,
    pub ref_len: usize,
}

impl BleuStats {
    pub fn zero(max_n: usize) -> Self {
        BleuStats {
            matches: vec![0; max_n],
            totals: vec![0; max_n],
            hyp_len: 0,
            ref_len: 0,
        }
    }

    /// Statistics of one segment against any number of references. Counts
    /// are clipped by the maximum count over references; the reference
    /// length is the one closest to the hypothesis length, shorter on ties.
    pub fn segment(hyp: &[TokenId], refs: &[&[TokenId]], max_n: usize) -> Result<Self> {
        if max_n == 0 {
            return Err(Error::invalid("BLEU max_n must be at least 1"));
        }
        if refs.is_empty() {
            return Err(Error::Empty("reference list"));
        }
        let mut stats = BleuStats::zero(max_n);
        stats.hyp_len = hyp.len();
        stats.ref_len = closest_ref_len(hyp.len(), refs.iter().map(|r| r.len()));
        for n in 1..=max_n {
            let hb = ngram_bag(hyp, n)?;
            let rbs = refs.iter().map(|r| ngram_bag(r, n)).collect::<Result<Vec<_>>>()?;
            stats.totals[n - 1] = hb.total();
            stats.matches[n - 1] = hb
                .iter()
                .map(|(g, c)| c.min(rbs.iter().map(|rb| rb.count(g)).max().unwrap_or(0)))
                .sum();
        }
        Ok(stats)
    }

    /// Single-reference statistics from precomputed bags (`bags[n-1]` holds
    /// order `n`).
    pub fn from_bags(hyp: &[NGramBag], hyp_len: usize, reference: &[NGramBag], ref_len: usize) -> Self {
        let max_n = hyp.len().min(reference.len());
        BleuStats {
            matches: (0..max_n).map(|i| hyp[i].intersection_total(&reference[i])).collect(),
            totals: (0..max_n).map(|i| hyp[i].total()).collect(),
            hyp_len,
            ref_len,
        }
    }

    pub fn add(&mut self, other: &BleuStats) {
        for (a, b) in self.matches.iter_mut().zip(&other.matches) {
            *a += b;
        }
        for (a, b) in self.totals.iter_mut().zip(&other.totals) {
            *a += b;
        }
        self.hyp_len += other.hyp_len;
        self.ref_len += other.ref_len;
    }

    /// Geometric mean of the modified precisions times the brevity penalty.
    ///
    /// With `add_one`, orders above 1 use `(matches + 1) / (totals + 1)`.
    /// Without it, any zero precision (including an order with no hypothesis
    /// n-grams) makes the score 0.
    pub fn score(&self, add_one: bool) -> f64 {
        if self.hyp_len == 0 || self.matches.is_empty() {
            return 0.0;
        }
        let mut log_sum = 0.0;
        for (i, (&m, &t)) in self.matches.iter().zip(&self.totals).enumerate() {
            let (m, t) = if add_one && i > 0 { (m + 1, t + 1) } else { (m, t) };
            if m == 0 {
                return 0.0;
            }
            log_sum += (m as f64 / t as f64).ln();
        }
        let geo = (log_sum / self.matches.len() as f64).exp();
        geo * brevity_penalty(self.hyp_len, self.ref_len)
    }
}

/// `exp(1 - r/c)` when the hypothesis is shorter than the reference, else 1.
pub fn brevity_penalty(hyp_len: usize, ref_len: usize) -> f64 {
    if hyp_len == 0 {
        0.0
    } else if hyp_len < ref_len {
        (1.0 - ref_len as f64 / hyp_len as f64).exp()
    } else {
        1.0
    }
}

fn closest_ref_len(hyp_len: usize, ref_lens: impl Iterator<Item = usize>) -> usize {
    ref_lens
        .min_by_key(|&r| (r.abs_diff(hyp_len), r))
        .unwrap_or(0)
}

/// BLEU of hypothesis `hyp` against the single reference `reference`.
pub fn sentence_bleu(hyp: &[TokenId], reference: &[TokenId], max_n: usize, add_one: bool) -> Result<f64> {
    Ok(BleuStats::segment(hyp, &[reference], max_n)?.score(add_one))
}

/// Corpus BLEU: clipped counts and lengths pooled over segments before the
/// precisions are formed.
pub fn corpus_bleu(hyps: &[Sequence], refs: &[Vec<Sequence>], max_n: usize) -> Result<f64> {
    Ok(corpus_stats(hyps, refs, max_n)?.score(false))
}

pub fn corpus_stats(hyps: &[Sequence], refs: &[Vec<Sequence>], max_n: usize) -> Result<BleuStats> {
    if hyps.len() != refs.len() {
        return Err(Error::invalid(format!(
            "{} hypotheses but {} reference lists",
            hyps.len(),
            refs.len()
        )));
    }
    if hyps.is_empty() {
        return Err(Error::Empty("hypothesis list"));
    }
    let mut total = BleuStats::zero(max_n);
    for (h, rs) in hyps.iter().zip(refs) {
        let rs: Vec<&[TokenId]> = rs.iter().map(|r| r.ids()).collect();
        total.add(&BleuStats::segment(h, &rs, max_n)?);
    }
    Ok(total)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::seq::Vocabulary;

    fn vocab() -> Vocabulary {
        Vocabulary::from_texts(["the cat is on mat a b c d e"], false)
    }

    #[test]
    fn identity_scores_one() {
        let v = vocab();
        let s = v.tokenize("the cat is on the mat", false);
        for max_n in 1..=4 {
            assert!((sentence_bleu(&s, &s, max_n, false).unwrap() - 1.0).abs() < 1e-12);
            assert!((sentence_bleu(&s, &s, max_n, true).unwrap() - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn clipped_unigram_precision() {
        let v = vocab();
        let hyp = v.tokenize("the the the the the the the", false);
        let reference = v.tokenize("the cat is on the mat", false);
        assert!((sentence_bleu(&hyp, &reference, 1, false).unwrap() - 2.0 / 7.0).abs() < 1e-12);
        let c = corpus_bleu(&[hyp], &[vec![reference]], 1).unwrap();
        assert!((c - 2.0 / 7.0).abs() < 1e-12);
    }

    #[test]
    fn smoothed_example() {
        let v = vocab();
        let c = v.tokenize("a b c d", false);
        let r = v.tokenize("a b c e", false);
        let want = (0.75f64 * 0.75 * (2.0 / 3.0) * 0.5).powf(0.25);
        let got = sentence_bleu(&c, &r, 4, true).unwrap();
        assert!((got - want).abs() < 1e-12);
        assert!((got - 0.658).abs() < 1e-3);
        // unsmoothed: no 4-gram match
        assert_eq!(sentence_bleu(&c, &r, 4, false).unwrap(), 0.0);
    }

    #[test]
    fn brevity_penalty_and_empty_hypothesis() {
        let v = vocab();
        let r = v.tokenize("a b c d", false);
        let h = v.tokenize("a b", false);
        let got = sentence_bleu(&h, &r, 1, false).unwrap();
        assert!((got - (1.0f64 - 2.0).exp()).abs() < 1e-12);
        assert_eq!(sentence_bleu(&[], &r, 1, true).unwrap(), 0.0);
    }

    #[test]
    fn closest_reference_length_prefers_shorter_on_ties() {
        assert_eq!(closest_ref_len(5, [3, 7].into_iter()), 3);
        assert_eq!(closest_ref_len(5, [7, 3].into_iter()), 3);
        assert_eq!(closest_ref_len(5, [6, 9].into_iter()), 6);
    }

    #[test]
    fn multi_reference_clipping_uses_max_count() {
        let v = vocab();
        let hyp = v.tokenize("the the the", false);
        let r1 = v.tokenize("the cat", false);
        let r2 = v.tokenize("the the mat", false);
        let stats = BleuStats::segment(&hyp, &[&r1, &r2], 1).unwrap();
        assert_eq!(stats.matches, vec![2]);
        assert_eq!(stats.ref_len, 3);
    }

    #[test]
    fn corpus_errors() {
        let v = vocab();
        let s = v.tokenize("a b", false);
        assert!(corpus_bleu(&[s.clone()], &[], 4).is_err());
        assert!(corpus_bleu(&[], &[], 4).is_err());
        assert!(corpus_bleu(&[s.clone()], &[vec![]], 4).is_err());
        assert!(corpus_bleu(&[s.clone()], &[vec![s]], 0).is_err());
    }

    #[test]
    fn single_segment_corpus_equals_sentence() {
        let v = vocab();
        let h = v.tokenize("the cat is on mat", false);
        let r = v.tokenize("the cat is on the mat", false);
        let s = sentence_bleu(&h, &r, 2, false).unwrap();
        let c = corpus_bleu(&[h], &[vec![r]], 2).unwrap();
        assert_eq!(s, c);
    }
}
