use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{check_header, SequenceModel};
use crate::error::{Error, Result};
use crate::seq::{Sequence, TokenId, Vocabulary, BOS, EOS};

pub const TABULAR_FORMAT: &str = "rangevote-tabular";
pub const TABULAR_VERSION: u32 = 1;

/// An explicit finite distribution over sequences.
///
/// Conditionals come from a prefix trie: `P(t | p) = mass(p·t) / mass(p)` and
/// `P(EOS | p) = P(p as a complete sequence) / mass(p)`.
#[derive(Debug, Clone)]
pub struct TabularModel {
    vocab: Vocabulary,
    lowercase: bool,
    support: Vec<(Sequence, f64)>,
    nodes: Vec<Node>,
}

#[derive(Debug, Clone, Default)]
struct Node {
    mass: f64,
    end_mass: f64,
    children: BTreeMap<TokenId, usize>,
}

impl TabularModel {
    /// Builds a model from `(sequence, weight)` pairs. Duplicate sequences are
    /// merged by summation and the result is normalized to total mass 1.
    pub fn new(vocab: Vocabulary, entries: impl IntoIterator<Item = (Sequence, f64)>) -> Result<Self> {
        let mut merged: BTreeMap<Sequence, f64> = BTreeMap::new();
        for (seq, p) in entries {
            if !(p.is_finite() && p > 0.0) {
                return Err(Error::invalid(format!("tabular probability must be positive and finite, got {p}")));
            }
            vocab.validate(&seq)?;
            *merged.entry(seq).or_insert(0.0) += p;
        }
        if merged.is_empty() {
            return Err(Error::Empty("tabular entry list"));
        }
        let total: f64 = merged.values().sum();
        let support: Vec<(Sequence, f64)> = merged.into_iter().map(|(s, p)| (s, p / total)).collect();

        let mut nodes = vec![Node::default()];
        for (seq, p) in &support {
            let mut cur = 0;
            nodes[0].mass += p;
            for &tok in seq.iter() {
                let next = match nodes[cur].children.get(&tok) {
                    Some(&n) => n,
                    None => {
                        nodes.push(Node::default());
                        let n = nodes.len() - 1;
                        nodes[cur].children.insert(tok, n);
                        n
                    }
                };
                nodes[next].mass += p;
                cur = next;
            }
            nodes[cur].end_mass += p;
        }
        Ok(TabularModel {
            vocab,
            lowercase: false,
            support,
            nodes,
        })
    }

    /// Builds the vocabulary from the entry texts, in first-occurrence order.
    pub fn from_texts<S: AsRef<str>>(entries: &[(S, f64)], lowercase: bool) -> Result<Self> {
        let vocab = Vocabulary::from_texts(entries.iter().map(|(t, _)| t.as_ref()), lowercase);
        let seqs: Vec<(Sequence, f64)> = entries
            .iter()
            .map(|(t, p)| (vocab.tokenize(t.as_ref(), lowercase), *p))
            .collect();
        let mut model = Self::new(vocab, seqs)?;
        model.lowercase = lowercase;
        Ok(model)
    }

    /// Normalized support, sorted by sequence.
    pub fn support(&self) -> &[(Sequence, f64)] {
        &self.support
    }

    pub fn max_len(&self) -> usize {
        self.support.iter().map(|(s, _)| s.len()).max().unwrap_or(0)
    }

    /// Probability of `seq` as a complete sequence (0 when absent).
    pub fn probability(&self, seq: &[TokenId]) -> f64 {
        self.find(seq).map(|n| self.nodes[n].end_mass).unwrap_or(0.0)
    }

    fn find(&self, prefix: &[TokenId]) -> Option<usize> {
        let mut cur = 0;
        for tok in prefix {
            cur = *self.nodes[cur].children.get(tok)?;
        }
        Some(cur)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let file = TabularFile {
            format: TABULAR_FORMAT.to_string(),
            version: TABULAR_VERSION,
            lowercase: self.lowercase,
            vocabulary: Some(self.vocab.regular_tokens().map(str::to_string).collect()),
            entries: self
                .support
                .iter()
                .map(|(s, p)| TabularEntry {
                    text: self.vocab.detokenize(s),
                    prob: *p,
                })
                .collect(),
        };
        let mut text = serde_json::to_string_pretty(&file).map_err(|e| Error::parse("tabular model", e))?;
        text.push('\n');
        std::fs::write(path, text).map_err(|e| Error::io(path, e))
    }

    pub(crate) fn from_json_value(value: serde_json::Value) -> Result<Self> {
        check_header(&value, TABULAR_FORMAT, "tabular model file", TABULAR_VERSION)?;
        let file: TabularFile = serde_json::from_value(value).map_err(|e| Error::parse("tabular model file", e))?;
        let entries: Vec<(String, f64)> = file.entries.into_iter().map(|e| (e.text, e.prob)).collect();
        match file.vocabulary {
            Some(tokens) => {
                let vocab = Vocabulary::new(tokens)?;
                let seqs: Vec<(Sequence, f64)> = entries
                    .iter()
                    .map(|(t, p)| (vocab.tokenize(t, file.lowercase), *p))
                    .collect();
                let mut model = Self::new(vocab, seqs)?;
                model.lowercase = file.lowercase;
                Ok(model)
            }
            None => Self::from_texts(&entries, file.lowercase),
        }
    }
}

impl SequenceModel for TabularModel {
    fn vocab(&self) -> &Vocabulary {
        &self.vocab
    }

    fn next_token_logprobs(&self, prefix: &[TokenId], _context: Option<&[TokenId]>) -> Result<Vec<f64>> {
        let node = self
            .find(prefix)
            .map(|n| &self.nodes[n])
            .filter(|n| n.mass > 0.0)
            .ok_or_else(|| Error::ZeroMass { prefix: prefix.to_vec() })?;
        let log_mass = node.mass.ln();
        let mut out = vec![f64::NEG_INFINITY; self.vocab.len()];
        for (&tok, &child) in &node.children {
            out[tok as usize] = self.nodes[child].mass.ln() - log_mass;
        }
        out[EOS as usize] = node.end_mass.ln() - log_mass;
        debug_assert_eq!(out[BOS as usize], f64::NEG_INFINITY);
        Ok(out)
    }

    fn lowercase(&self) -> bool {
        self.lowercase
    }
}

#[derive(Serialize, Deserialize)]
struct TabularFile {
    format: String,
    version: u32,
    #[serde(default)]
    lowercase: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    vocabulary: Option<Vec<String>>,
    entries: Vec<TabularEntry>,
}

#[derive(Serialize, Deserialize)]
struct TabularEntry {
    text: String,
    prob: f64,
}
