use super::{CandidateSet, Provenance};
use crate::error::{Error, Result};
use crate::seq::{ngram_set, TokenId};

/// Fraction of the source's distinct unigrams that also occur in `output`.
/// `None` when the source has no tokens.
pub fn unigram_overlap_rate(output: &[TokenId], source: &[TokenId]) -> Option<f64> {
    let src = ngram_set(source, 1).expect("order 1 is valid");
    if src.is_empty() {
        return None;
    }
    let out = ngram_set(output, 1).expect("order 1 is valid");
    Some(out.intersection_len(&src) as f64 / src.len() as f64)
}

/// True when `output` contains at least `threshold` of the source's distinct
/// unigrams. An empty source never produces copies.
pub fn is_partial_copy(output: &[TokenId], source: &[TokenId], threshold: f64) -> bool {
    unigram_overlap_rate(output, source).is_some_and(|rate| rate >= threshold)
}

/// Removes partial copies of `source`, preserving order.
pub fn filter_copies(candidates: &CandidateSet, source: &[TokenId], threshold: f64) -> Result<CandidateSet> {
    if !(0.0..=1.0).contains(&threshold) {
        return Err(Error::invalid("copy filter threshold must lie in [0, 1]"));
    }
    let items = candidates
        .items
        .iter()
        .filter(|c| !is_partial_copy(&c.seq, source, threshold))
        .cloned()
        .collect();
    Ok(CandidateSet::new(items, Provenance::Filtered {
        threshold,
        from: Box::new(candidates.provenance.clone()),
    }))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::decode::ScoredSequence;
    use crate::seq::Vocabulary;

    #[test]
    fn copy_filter_examples() {
        let vocab = Vocabulary::from_texts(["the cat sat ran home a dog runs"], false);
        let tok = |s: &str| vocab.tokenize(s, false);
        let source = tok("the cat sat");
        let set = CandidateSet::external(vec![
            ScoredSequence::new(tok("the cat sat"), -1.0),
            ScoredSequence::new(tok("a dog runs"), -2.0),
            ScoredSequence::new(tok("the cat ran home"), -3.0),
        ]);
        let kept = filter_copies(&set, &source, 0.5).unwrap();
        assert_eq!(kept.len(), 1);
        assert_eq!(kept[0].seq, tok("a dog runs"));
        assert_eq!(unigram_overlap_rate(&tok("the cat ran home"), &source), Some(2.0 / 3.0));
        assert_eq!(unigram_overlap_rate(&tok("a dog runs"), &source), Some(0.0));
    }

    #[test]
    fn empty_source_filters_nothing() {
        let set = CandidateSet::external(vec![ScoredSequence::new(vec![3, 4], -1.0)]);
        assert_eq!(filter_copies(&set, &[], 0.0).unwrap().len(), 1);
        assert!(!is_partial_copy(&[3], &[], 0.0));
    }

    #[test]
    fn rejects_bad_threshold() {
        let set = CandidateSet::external(vec![]);
        assert!(filter_copies(&set, &[3], 1.5).is_err());
        assert!(filter_copies(&set, &[3], -0.1).is_err());
    }
}
