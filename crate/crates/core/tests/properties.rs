mod common;

use proptest::prelude::*;
use rangevote::decode::{beam_search, sample_sequences, BeamParams, SamplingStrategy, ScoredSequence};
use rangevote::eval::{corpus_bleu, distinct_stats, sign_test};
use rangevote::models::{sequence_logprob, NGramLM};
use rangevote::oracle::{enumerate_distribution, EnumerateOptions};
use rangevote::seq::{Sequence, TokenId, Vocabulary};
use rangevote::voting::{range_vote, Similarity};

use common::{all_similarities, random_tabular};

fn vocab() -> Vocabulary {
    Vocabulary::new(["a", "b", "c", "d", "e", "f"]).unwrap()
}

fn seq(max_len: usize) -> impl Strategy<Value = Sequence> {
    let ids = vocab().regular_ids();
    prop::collection::vec(ids, 0..=max_len).prop_map(Sequence::new)
}

fn weighted(max_items: usize) -> impl Strategy<Value = Vec<ScoredSequence>> {
    prop::collection::vec((seq(7), -8.0f64..0.0), 1..=max_items)
        .prop_map(|items| items.into_iter().map(|(s, lp)| ScoredSequence::new(s, lp)).collect())
}

fn similarities() -> Vec<(String, Similarity)> {
    all_similarities(&vocab(), 3)
}

fn scores(cands: &[ScoredSequence], voters: &[ScoredSequence], sim: &Similarity) -> Vec<f64> {
    let r = range_vote(cands, voters, sim, false).unwrap();
    let mut out = vec![0.0; cands.len()];
    for c in &r.ranked {
        out[c.index] = c.score;
    }
    out
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(128))]

    #[test]
    fn similarities_lie_in_unit_interval(v in seq(8), c in seq(8)) {
        for (name, sim) in similarities() {
            let s = sim.score(&v, &c);
            prop_assert!((0.0..=1.0).contains(&s), "{name}: {s}");
        }
    }

    #[test]
    fn a_sequence_matches_itself(s in seq(8)) {
        let n = s.len();
        for (name, sim) in similarities() {
            let got = sim.score(&s, &s);
            let full = match &sim {
                Similarity::Prec(k) | Similarity::Overl(k) => n >= *k,
                Similarity::Bleu { smoothed: false, max_n } => n >= *max_n,
                Similarity::Bleu { smoothed: true, .. } => n >= 1,
                Similarity::EmbedCosine(_) => false,
            };
            if full {
                prop_assert!((got - 1.0).abs() < 1e-12, "{name}: {got}");
            }
        }
    }

    #[test]
    fn splitting_a_voter_keeps_scores(
        voters in weighted(12),
        pick in any::<prop::sample::Index>(),
        alpha in 0.01f64..0.99,
    ) {
        let j = pick.index(voters.len());
        let mut split = voters.clone();
        let v = split.remove(j);
        split.insert(0, ScoredSequence::new(v.seq.clone(), v.logprob + alpha.ln()));
        split.push(ScoredSequence::new(v.seq.clone(), v.logprob + (1.0 - alpha).ln()));
        for (name, sim) in similarities() {
            let a = scores(&voters, &voters, &sim);
            let b = scores(&voters, &split, &sim);
            for (x, y) in a.iter().zip(&b) {
                prop_assert!((x - y).abs() <= 1e-12, "{name}: {x} vs {y}");
            }
        }
    }

    #[test]
    fn duplicate_candidates_tie_and_leave_others_alone(
        cands in weighted(10),
        voters in weighted(10),
        pick in any::<prop::sample::Index>(),
    ) {
        let j = pick.index(cands.len());
        let mut more = cands.clone();
        more.push(cands[j].clone());
        for (name, sim) in similarities() {
            let a = scores(&cands, &voters, &sim);
            let b = scores(&more, &voters, &sim);
            prop_assert_eq!(&a[..], &b[..cands.len()], "{}", name);
            prop_assert_eq!(b[j], b[cands.len()]);
        }
    }

    #[test]
    fn shifting_voter_logprobs_rescales_scores(voters in weighted(10), shift in -5.0f64..5.0) {
        let shifted: Vec<ScoredSequence> = voters
            .iter()
            .map(|v| ScoredSequence::new(v.seq.clone(), v.logprob + shift))
            .collect();
        for (name, sim) in similarities() {
            let a = scores(&voters, &voters, &sim);
            let b = scores(&voters, &shifted, &sim);
            for (x, y) in a.iter().zip(&b) {
                prop_assert!((x * shift.exp() - y).abs() <= 1e-9 * y.abs().max(1e-300), "{name}: {x} vs {y}");
            }
        }
    }

    #[test]
    fn vote_is_independent_of_thread_count(voters in weighted(16)) {
        let sim = Similarity::Bleu { max_n: 2, smoothed: true };
        let run = |threads| {
            rayon::ThreadPoolBuilder::new()
                .num_threads(threads)
                .build()
                .unwrap()
                .install(|| range_vote(&voters, &voters, &sim, true).unwrap())
        };
        prop_assert_eq!(run(1), run(4));
    }

    #[test]
    fn corpus_bleu_ignores_segment_order(
        pairs in prop::collection::vec((seq(8), seq(8), seq(8)), 1..8),
        rot in 0usize..8,
    ) {
        let hyps: Vec<Sequence> = pairs.iter().map(|p| p.0.clone()).collect();
        let refs: Vec<Vec<Sequence>> = pairs.iter().map(|p| vec![p.1.clone(), p.2.clone()]).collect();
        let a = corpus_bleu(&hyps, &refs, 4).unwrap();
        let (mut h2, mut r2) = (hyps.clone(), refs.clone());
        let k = rot % hyps.len();
        h2.rotate_left(k);
        r2.rotate_left(k);
        h2.reverse();
        r2.reverse();
        prop_assert_eq!(a, corpus_bleu(&h2, &r2, 4).unwrap());
        prop_assert!((0.0..=1.0).contains(&a));
    }

    #[test]
    fn distinct_stats_ignore_output_order(mut outputs in prop::collection::vec(seq(6), 1..10)) {
        let a = distinct_stats(&outputs).unwrap();
        outputs.reverse();
        let b = distinct_stats(&outputs).unwrap();
        prop_assert_eq!(a, b);
        prop_assert!(a.sequences <= outputs.len());
    }

    #[test]
    fn sign_test_is_symmetric(a in 0u64..300, b in 0u64..300) {
        prop_assume!(a + b > 0);
        let p = sign_test(a, b).unwrap();
        prop_assert_eq!(p, sign_test(b, a).unwrap());
        prop_assert!(p > 0.0 && p <= 1.0);
    }

    #[test]
    fn tabular_enumeration_covers_all_mass(seed in 0u64..10_000) {
        let model = random_tabular(seed, 40);
        let dist = enumerate_distribution(&model, None, &EnumerateOptions::new(model.max_len().max(1))).unwrap();
        prop_assert_eq!(dist.len(), model.support().len());
        prop_assert!((dist.covered_mass() - 1.0).abs() < 1e-9);
        for w in dist.entries.windows(2) {
            prop_assert!(w[0].logprob >= w[1].logprob);
        }
    }
}

fn ngram() -> NGramLM {
    NGramLM::train_from_texts(
        &["a b c", "a b d", "b c d e", "a c", "f a b", "e e d"],
        2,
        0.5,
        false,
    )
    .unwrap()
}

fn check_logprobs(model: &NGramLM, items: &[ScoredSequence]) {
    for s in items {
        let ids: &[TokenId] = &s.seq;
        let direct = sequence_logprob(model, ids, None).unwrap();
        assert!((direct - s.logprob).abs() < 1e-9, "{direct} vs {}", s.logprob);
    }
}

#[test]
fn decoded_logprobs_match_the_chain_rule() {
    let model = ngram();
    let beam = beam_search(&model, None, &BeamParams::new(6, 5)).unwrap();
    assert_eq!(beam.len(), 6);
    check_logprobs(&model, &beam);
    let samples = sample_sequences(&model, None, 20, SamplingStrategy::Nucleus { p: 0.8 }, 9, 6).unwrap();
    check_logprobs(&model, &samples);
}
