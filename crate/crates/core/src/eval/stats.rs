//! Significance tests.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::bleu::BleuStats;
use crate::error::{Error, Result};
use crate::logmath::log_sum_exp;
use crate::seq::{Sequence, TokenId};

/// Two-tailed exact sign test with ties already discarded:
/// `p = 2 · P(X <= min(a, b))` for `X ~ Binomial(a + b, 1/2)`, capped at 1.
pub fn sign_test(wins_a: u64, wins_b: u64) -> Result<f64> {
    let n = wins_a + wins_b;
    if n == 0 {
        return Err(Error::invalid("sign test needs at least one non-tied comparison"));
    }
    let m = wins_a.min(wins_b);
    // ln C(n, i) for i = 0..=m
    let mut log_binom = Vec::with_capacity(m as usize + 1);
    let mut lc = 0.0f64;
    for i in 0..=m {
        log_binom.push(lc);
        lc += ((n - i) as f64).ln() - ((i + 1) as f64).ln();
    }
    let tail = (log_sum_exp(log_binom.iter().copied()) - n as f64 * std::f64::consts::LN_2).exp();
    Ok((2.0 * tail).min(1.0))
}

/// Metric compared by [`paired_bootstrap`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum BootstrapMetric {
    /// Corpus BLEU of the resampled segments.
    CorpusBleu { max_n: usize },
    /// Mean sentence BLEU (first reference of each segment).
    MeanSentenceBleu { max_n: usize, smoothed: bool },
}

/// Paired bootstrap resampling: draws segment indices with replacement
/// `resamples` times and returns the fraction of resamples in which system A
/// scores no higher than system B.
pub fn paired_bootstrap(
    hyps_a: &[Sequence],
    hyps_b: &[Sequence],
    refs: &[Vec<Sequence>],
    metric: BootstrapMetric,
    resamples: usize,
    seed: u64,
) -> Result<f64> {
    if hyps_a.len() != hyps_b.len() || hyps_a.len() != refs.len() {
        return Err(Error::invalid("paired bootstrap needs aligned system outputs and references"));
    }
    if hyps_a.is_empty() {
        return Err(Error::Empty("hypothesis list"));
    }
    if resamples == 0 {
        return Err(Error::invalid("bootstrap needs at least one resample"));
    }
    let n = hyps_a.len();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut not_better = 0usize;
    match metric {
        BootstrapMetric::CorpusBleu { max_n } => {
            let seg = |hyps: &[Sequence]| -> Result<Vec<BleuStats>> {
                hyps.iter()
                    .zip(refs)
                    .map(|(h, rs)| {
                        let rs: Vec<&[TokenId]> = rs.iter().map(|r| r.ids()).collect();
                        BleuStats::segment(h, &rs, max_n)
                    })
                    .collect()
            };
            let (sa, sb) = (seg(hyps_a)?, seg(hyps_b)?);
            for _ in 0..resamples {
                let (mut ta, mut tb) = (BleuStats::zero(max_n), BleuStats::zero(max_n));
                for _ in 0..n {
                    let i = rng.gen_range(0..n);
                    ta.add(&sa[i]);
                    tb.add(&sb[i]);
                }
                if ta.score(false) <= tb.score(false) {
                    not_better += 1;
                }
            }
        }
        BootstrapMetric::MeanSentenceBleu { max_n, smoothed } => {
            let seg = |hyps: &[Sequence]| -> Result<Vec<f64>> {
                hyps.iter()
                    .zip(refs)
                    .map(|(h, rs)| {
                        let first = rs.first().ok_or(Error::Empty("reference list"))?;
                        super::bleu::sentence_bleu(h, first, max_n, smoothed)
                    })
                    .collect()
            };
            let (sa, sb) = (seg(hyps_a)?, seg(hyps_b)?);
            for _ in 0..resamples {
                let (mut ta, mut tb) = (0.0, 0.0);
                for _ in 0..n {
                    let i = rng.gen_range(0..n);
                    ta += sa[i];
                    tb += sb[i];
                }
                if ta <= tb {
                    not_better += 1;
                }
            }
        }
    }
    Ok(not_better as f64 / resamples as f64)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::seq::Vocabulary;

    // Independent reference: direct rational binomial sum for small n.
    fn sign_test_direct(a: u64, b: u64) -> f64 {
        let n = a + b;
        let m = a.min(b);
        let mut c = 1.0f64;
        let mut s = 0.0;
        for i in 0..=m {
            s += c;
            c = c * (n - i) as f64 / (i + 1) as f64;
        }
        (2.0 * s / 2f64.powi(n as i32)).min(1.0)
    }

    #[test]
    fn reported_sign_tests() {
        assert!((sign_test(106, 73).unwrap() - 0.0165).abs() <= 0.0005);
        assert!((sign_test(69, 44).unwrap() - 0.0235).abs() <= 0.0005);
        assert!((sign_test(27, 40).unwrap() - 0.142).abs() <= 0.0005);
        assert_eq!(sign_test(5, 5).unwrap(), 1.0);
        assert!(sign_test(0, 0).is_err());
    }

    #[test]
    fn sign_test_matches_direct_sum_and_is_symmetric() {
        for a in 0..30 {
            for b in 0..30 {
                if a + b == 0 {
                    continue;
                }
                let p = sign_test(a, b).unwrap();
                assert!((p - sign_test_direct(a, b)).abs() < 1e-12, "{a} {b}");
                assert_eq!(p, sign_test(b, a).unwrap());
            }
        }
    }

    fn corpus() -> (Vocabulary, Vec<Sequence>, Vec<Sequence>, Vec<Vec<Sequence>>) {
        let v = Vocabulary::from_texts(["a b c d e f g h"], false);
        let t = |s: &str| v.tokenize(s, false);
        let refs = vec![vec![t("a b c d")], vec![t("e f g h")], vec![t("a c e g")]];
        let good = vec![t("a b c d"), t("e f g h"), t("a c e g")];
        let bad = vec![t("a b c e"), t("e f h g"), t("a c e h")];
        (v, good, bad, refs)
    }

    #[test]
    fn identical_systems_give_p_one() {
        let (_, good, _, refs) = corpus();
        let m = BootstrapMetric::CorpusBleu { max_n: 2 };
        assert_eq!(paired_bootstrap(&good, &good, &refs, m, 200, 1).unwrap(), 1.0);
    }

    #[test]
    fn strict_segment_dominance_gives_p_zero() {
        let (_, good, bad, refs) = corpus();
        let m = BootstrapMetric::MeanSentenceBleu { max_n: 4, smoothed: true };
        for b in [1, 10, 500] {
            assert_eq!(paired_bootstrap(&good, &bad, &refs, m, b, 3).unwrap(), 0.0);
        }
    }

    #[test]
    fn bootstrap_is_deterministic_and_validates() {
        let (_, good, bad, refs) = corpus();
        let m = BootstrapMetric::CorpusBleu { max_n: 2 };
        let p1 = paired_bootstrap(&bad, &good, &refs, m, 300, 9).unwrap();
        let p2 = paired_bootstrap(&bad, &good, &refs, m, 300, 9).unwrap();
        assert_eq!(p1, p2);
        assert!(paired_bootstrap(&good[..2], &bad, &refs, m, 10, 0).is_err());
        assert!(paired_bootstrap(&good, &bad, &refs, m, 0, 0).is_err());
    }
}
