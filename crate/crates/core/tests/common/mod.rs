#![allow(dead_code)]

use std::collections::BTreeMap;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rangevote::models::TabularModel;
use rangevote::oracle::NestedPrefixGenerator;
use rangevote::seq::{Sequence, Vocabulary};
use rangevote::voting::{Similarity, TokenVectors};

/// Random support over a small vocabulary: sequences of length 0..=6 with
/// weights in (0, 1].
pub fn random_tabular(seed: u64, max_support: usize) -> TabularModel {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let vocab = Vocabulary::new((0..8).map(|i| format!("t{i}"))).unwrap();
    let ids = vocab.regular_ids();
    let target = rng.gen_range(2..=max_support.max(2));
    let mut entries: BTreeMap<Sequence, f64> = BTreeMap::new();
    while entries.len() < target {
        let len = rng.gen_range(0..=6);
        let seq: Sequence = (0..len).map(|_| rng.gen_range(ids.clone())).collect();
        let w = rng.gen_range(0.01..=1.0);
        entries.insert(seq, w);
    }
    TabularModel::new(vocab, entries).unwrap()
}

/// Alternates nested-prefix and uniform-random models. With `large`, supports
/// reach several hundred sequences (at most 500), otherwise at most 50.
pub fn model_suite(seed: u64, large: bool) -> TabularModel {
    if seed % 2 == 0 {
        let g = if large {
            NestedPrefixGenerator {
                families: (2, 2 + (seed as usize / 2) % 19),
                members: (3, 3 + (seed as usize / 2) % 22),
                ..Default::default()
            }
        } else {
            NestedPrefixGenerator::default()
        };
        assert!(g.max_support() <= if large { 500 } else { 50 });
        g.generate(seed).unwrap()
    } else {
        random_tabular(seed, if large { 500 } else { 50 })
    }
}

/// Every similarity kind; the embedding table is random per vocabulary.
pub fn all_similarities(vocab: &Vocabulary, seed: u64) -> Vec<(String, Similarity)> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x5eed);
    let entries: Vec<(String, Vec<f64>)> = vocab
        .regular_tokens()
        .map(|t| (t.to_string(), (0..4).map(|_| rng.gen_range(-1.0..1.0)).collect()))
        .collect();
    let vectors = TokenVectors::from_entries(vocab, entries).unwrap();
    vec![
        ("prec_1".into(), Similarity::Prec(1)),
        ("prec_2".into(), Similarity::Prec(2)),
        ("overl_1".into(), Similarity::Overl(1)),
        ("overl_2".into(), Similarity::Overl(2)),
        ("bleu".into(), Similarity::Bleu { max_n: 4, smoothed: false }),
        ("smoothed_bleu".into(), Similarity::Bleu { max_n: 4, smoothed: true }),
        ("embed_cosine".into(), Similarity::EmbedCosine(vectors)),
    ]
}
