use std::collections::{BTreeMap, HashMap};
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{check_header, SequenceModel};
use crate::error::{Error, Result};
use crate::seq::{Sequence, TokenId, Vocabulary, BOS, EOS, UNK};

pub const NGRAM_FORMAT: &str = "rangevote-ngram";
pub const NGRAM_VERSION: u32 = 1;

/// Add-k smoothed n-gram language model without backoff.
///
/// Outcomes are the surface tokens plus the end marker, so
/// `P(t | h) = (count(h, t) + k) / (count(h) + k·(V + 1))`.
/// A history never seen in training with `k = 0` gets the uniform
/// distribution over those `V + 1` outcomes.
#[derive(Debug, Clone)]
pub struct NGramLM {
    vocab: Vocabulary,
    order: usize,
    add_k: f64,
    lowercase: bool,
    counts: HashMap<Vec<TokenId>, HistoryCounts>,
}

#[derive(Debug, Clone, Default, PartialEq)]
struct HistoryCounts {
    total: u64,
    by_token: BTreeMap<TokenId, u64>,
}

/// Counts `(history, token)` events over `corpus`, padding histories with the
/// begin marker and closing every line with an end-marker event.
///
/// Unknown-token targets are not counted (the unknown marker is not a model
/// outcome); they still appear inside later histories.
pub fn train_ngram_lm(corpus: &[Sequence], vocab: Vocabulary, order: usize, add_k: f64) -> Result<NGramLM> {
    if corpus.is_empty() {
        return Err(Error::Empty("training corpus"));
    }
    if order == 0 {
        return Err(Error::invalid("n-gram order must be at least 1"));
    }
    if !(add_k.is_finite() && add_k >= 0.0) {
        return Err(Error::invalid(format!("add-k constant must be finite and non-negative, got {add_k}")));
    }
    let mut counts: HashMap<Vec<TokenId>, HistoryCounts> = HashMap::new();
    for line in corpus {
        vocab.validate(line)?;
        let mut padded = vec![BOS; order - 1];
        padded.extend_from_slice(line);
        for i in 0..=line.len() {
            let target = if i < line.len() { line[i] } else { EOS };
            if target == UNK {
                continue;
            }
            let history = padded[i..i + order - 1].to_vec();
            let entry = counts.entry(history).or_default();
            entry.total += 1;
            *entry.by_token.entry(target).or_insert(0) += 1;
        }
    }
    Ok(NGramLM {
        vocab,
        order,
        add_k,
        lowercase: false,
        counts,
    })
}

impl NGramLM {
    /// Trains on raw text lines, building the vocabulary from the corpus.
    pub fn train_from_texts<S: AsRef<str>>(lines: &[S], order: usize, add_k: f64, lowercase: bool) -> Result<Self> {
        let vocab = Vocabulary::from_texts(lines.iter().map(AsRef::as_ref), lowercase);
        let corpus: Vec<Sequence> = lines.iter().map(|l| vocab.tokenize(l.as_ref(), lowercase)).collect();
        let mut lm = train_ngram_lm(&corpus, vocab, order, add_k)?;
        lm.lowercase = lowercase;
        Ok(lm)
    }

    pub fn order(&self) -> usize {
        self.order
    }

    pub fn add_k(&self) -> f64 {
        self.add_k
    }

    pub fn with_lowercase(mut self, lowercase: bool) -> Self {
        self.lowercase = lowercase;
        self
    }

    fn history(&self, prefix: &[TokenId]) -> Vec<TokenId> {
        let want = self.order - 1;
        let mut h = vec![BOS; want.saturating_sub(prefix.len())];
        h.extend_from_slice(&prefix[prefix.len().saturating_sub(want)..]);
        h
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let mut text = self.to_json()?;
        text.push('\n');
        std::fs::write(path, text).map_err(|e| Error::io(path, e))
    }

    /// Serialized model document; byte-identical for equal models.
    pub fn to_json(&self) -> Result<String> {
        let mut histories: Vec<(&Vec<TokenId>, &HistoryCounts)> = self.counts.iter().collect();
        histories.sort_by(|a, b| a.0.cmp(b.0));
        let mut counts = Vec::new();
        for (history, hc) in histories {
            let history: Vec<String> = self.vocab.surfaces(history).map(str::to_string).collect();
            for (&tok, &count) in &hc.by_token {
                counts.push(CountRecord {
                    history: history.clone(),
                    token: self.vocab.surfaces(&[tok]).next().unwrap_or_default().to_string(),
                    count,
                });
            }
        }
        let file = NGramFile {
            format: NGRAM_FORMAT.to_string(),
            version: NGRAM_VERSION,
            order: self.order,
            add_k: self.add_k,
            lowercase: self.lowercase,
            vocabulary: self.vocab.regular_tokens().map(str::to_string).collect(),
            counts,
        };
        serde_json::to_string_pretty(&file).map_err(|e| Error::parse("n-gram model", e))
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_json(&text)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let value: serde_json::Value = serde_json::from_str(text).map_err(|e| Error::parse("n-gram model file", e))?;
        Self::from_json_value(value)
    }

    pub(crate) fn from_json_value(value: serde_json::Value) -> Result<Self> {
        const WHAT: &str = "n-gram model file";
        check_header(&value, NGRAM_FORMAT, WHAT, NGRAM_VERSION)?;
        let file: NGramFile = serde_json::from_value(value).map_err(|e| Error::parse(WHAT, e))?;
        if file.order == 0 {
            return Err(Error::parse(WHAT, "order must be at least 1"));
        }
        if !(file.add_k.is_finite() && file.add_k >= 0.0) {
            return Err(Error::parse(WHAT, "add_k must be finite and non-negative"));
        }
        let vocab = Vocabulary::new(file.vocabulary)?;
        let resolve = |s: &str| vocab.id(s).ok_or_else(|| Error::parse(WHAT, format!("unknown token {s:?}")));
        let mut counts: HashMap<Vec<TokenId>, HistoryCounts> = HashMap::new();
        for rec in file.counts {
            if rec.history.len() != file.order - 1 {
                return Err(Error::parse(WHAT, format!("history {:?} does not match order {}", rec.history, file.order)));
            }
            if rec.count == 0 {
                return Err(Error::parse(WHAT, "counts must be positive"));
            }
            let history = rec.history.iter().map(|s| resolve(s)).collect::<Result<Vec<_>>>()?;
            let token = resolve(&rec.token)?;
            if token == BOS || token == UNK {
                return Err(Error::parse(WHAT, format!("{:?} is not a model outcome", rec.token)));
            }
            let entry = counts.entry(history).or_default();
            entry.total += rec.count;
            *entry.by_token.entry(token).or_insert(0) += rec.count;
        }
        Ok(NGramLM {
            vocab,
            order: file.order,
            add_k: file.add_k,
            lowercase: file.lowercase,
            counts,
        })
    }
}

impl SequenceModel for NGramLM {
    fn vocab(&self) -> &Vocabulary {
        &self.vocab
    }

    fn next_token_logprobs(&self, prefix: &[TokenId], _context: Option<&[TokenId]>) -> Result<Vec<f64>> {
        let outcomes = self.vocab.num_regular() as f64 + 1.0;
        let mut out = vec![f64::NEG_INFINITY; self.vocab.len()];
        let empty = HistoryCounts::default();
        let hc = self.counts.get(&self.history(prefix)).unwrap_or(&empty);
        let denom = hc.total as f64 + self.add_k * outcomes;
        let ids = self.vocab.regular_ids().chain(std::iter::once(EOS));
        if denom == 0.0 {
            let uniform = -outcomes.ln();
            for id in ids {
                out[id as usize] = uniform;
            }
        } else {
            let log_denom = denom.ln();
            for id in ids {
                let c = hc.by_token.get(&id).copied().unwrap_or(0) as f64;
                out[id as usize] = (c + self.add_k).ln() - log_denom;
            }
        }
        Ok(out)
    }

    fn lowercase(&self) -> bool {
        self.lowercase
    }
}

#[derive(Serialize, Deserialize)]
struct NGramFile {
    format: String,
    version: u32,
    order: usize,
    add_k: f64,
    #[serde(default)]
    lowercase: bool,
    vocabulary: Vec<String>,
    counts: Vec<CountRecord>,
}

#[derive(Serialize, Deserialize)]
struct CountRecord {
    history: Vec<String>,
    token: String,
    count: u64,
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::logmath::log_sum_exp;
    use crate::models::{sequence_logprob, AnyModel};

    fn p(m: &NGramLM, prefix: &str, tok: &str) -> f64 {
        let v = m.vocab();
        let prefix = v.tokenize(prefix, false);
        let lps = m.next_token_logprobs(&prefix, None).unwrap();
        let id = if tok == "</s>" { EOS } else { v.id(tok).unwrap() };
        lps[id as usize].exp()
    }

    #[test]
    fn mle_bigram() {
        let m = NGramLM::train_from_texts(&["a b", "a c"], 2, 0.0, false).unwrap();
        assert!((p(&m, "a", "b") - 0.5).abs() < 1e-12);
        assert!((p(&m, "", "a") - 1.0).abs() < 1e-12);
        assert_eq!(p(&m, "a", "a"), 0.0);
    }

    #[test]
    fn add_one_bigram() {
        let m = NGramLM::train_from_texts(&["a b", "a c"], 2, 1.0, false).unwrap();
        assert_eq!(m.vocab().num_regular(), 3);
        assert!((p(&m, "a", "b") - 1.0 / 3.0).abs() < 1e-12);
    }

    #[test]
    fn unigram_with_end_marker() {
        let m = NGramLM::train_from_texts(&["a"], 1, 0.0, false).unwrap();
        assert!((p(&m, "", "a") - 0.5).abs() < 1e-12);
        assert!((p(&m, "a a a", "</s>") - 0.5).abs() < 1e-12);
    }

    #[test]
    fn chain_rule_probability() {
        let m = NGramLM::train_from_texts(&["a b", "a c"], 2, 0.0, false).unwrap();
        let ab = m.vocab().tokenize("a b", false);
        assert!((sequence_logprob(&m, &ab, None).unwrap() - 0.5f64.ln()).abs() < 1e-12);
    }

    #[test]
    fn unseen_history_is_uniform_under_mle() {
        let m = NGramLM::train_from_texts(&["a b"], 2, 0.0, false).unwrap();
        // history "b" only precedes the end marker; history "x" never occurs
        let lps = m.next_token_logprobs(&[UNK], None).unwrap();
        let mass = log_sum_exp(lps.iter().copied()).exp();
        assert!((mass - 1.0).abs() < 1e-12);
        assert!((lps[EOS as usize].exp() - 1.0 / 3.0).abs() < 1e-12);
    }

    #[test]
    fn training_errors() {
        let empty: [&str; 0] = [];
        assert!(matches!(NGramLM::train_from_texts(&empty, 2, 0.0, false), Err(Error::Empty(_))));
        assert!(NGramLM::train_from_texts(&["a"], 0, 0.0, false).is_err());
        assert!(NGramLM::train_from_texts(&["a"], 1, -1.0, false).is_err());
    }

    #[test]
    fn unknown_targets_are_skipped() {
        let vocab = Vocabulary::new(["a"]).unwrap();
        let corpus = vec![vocab.tokenize("a zz a", false)];
        let m = train_ngram_lm(&corpus, vocab, 2, 0.0).unwrap();
        let lps = m.next_token_logprobs(&[3, UNK], None).unwrap();
        assert!((lps[3].exp() - 1.0).abs() < 1e-12);
        assert_eq!(lps[UNK as usize], f64::NEG_INFINITY);
    }

    #[test]
    fn save_load_round_trip_and_determinism() {
        let dir = tempfile::tempdir().unwrap();
        let m = NGramLM::train_from_texts(&["a b", "a c", "c a b"], 3, 0.5, true).unwrap();
        let (p1, p2) = (dir.path().join("m1.json"), dir.path().join("m2.json"));
        m.save(&p1).unwrap();
        m.save(&p2).unwrap();
        assert_eq!(std::fs::read(&p1).unwrap(), std::fs::read(&p2).unwrap());

        let back = NGramLM::load(&p1).unwrap();
        assert_eq!(back.order(), 3);
        assert!(back.lowercase());
        for prefix in [&[][..], &[3], &[3, 4], &[5, 3, 4], &[4, 4]] {
            assert_eq!(
                m.next_token_logprobs(prefix, None).unwrap(),
                back.next_token_logprobs(prefix, None).unwrap()
            );
        }
        assert!(matches!(AnyModel::load(&p1).unwrap(), AnyModel::NGram(_)));
    }

    #[test]
    fn load_errors() {
        let m = NGramLM::train_from_texts(&["a b", "a c"], 2, 0.0, false).unwrap();
        let text = m.to_json().unwrap();
        let truncated = &text[..text.len() / 2];
        assert!(matches!(NGramLM::from_json(truncated), Err(Error::Parse { .. })));

        let bumped = text.replace("\"version\": 1", "\"version\": 99");
        assert!(matches!(NGramLM::from_json(&bumped), Err(Error::VersionMismatch { found: 99, .. })));

        let wrong = text.replace(NGRAM_FORMAT, "something-else");
        assert!(matches!(NGramLM::from_json(&wrong), Err(Error::Parse { .. })));
    }
}
