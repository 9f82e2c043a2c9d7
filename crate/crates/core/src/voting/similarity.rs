use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::eval::BleuStats;
use crate::seq::{ngram_bag, ngram_set, NGramBag, NGramSet, TokenId, Vocabulary};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SimilarityKind {
    Prec,
    Overl,
    Bleu,
    SmoothedBleu,
    EmbedCosine,
}

/// Serializable description of a similarity; resolve it with
/// [`Similarity::from_spec`] before voting.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SimilaritySpec {
    pub kind: SimilarityKind,
    #[serde(default = "one")]
    pub n: usize,
    #[serde(default = "four")]
    pub max_n: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub vectors: Option<PathBuf>,
}

fn one() -> usize {
    1
}

fn four() -> usize {
    4
}

impl SimilaritySpec {
    pub fn new(kind: SimilarityKind) -> Self {
        SimilaritySpec {
            kind,
            n: 1,
            max_n: 4,
            vectors: None,
        }
    }

    pub fn prec(n: usize) -> Self {
        SimilaritySpec { n, ..Self::new(SimilarityKind::Prec) }
    }

    pub fn overl(n: usize) -> Self {
        SimilaritySpec { n, ..Self::new(SimilarityKind::Overl) }
    }

    pub fn bleu(max_n: usize, smoothed: bool) -> Self {
        let kind = if smoothed { SimilarityKind::SmoothedBleu } else { SimilarityKind::Bleu };
        SimilaritySpec { max_n, ..Self::new(kind) }
    }

    pub fn embed_cosine(vectors: impl Into<PathBuf>) -> Self {
        SimilaritySpec {
            vectors: Some(vectors.into()),
            ..Self::new(SimilarityKind::EmbedCosine)
        }
    }

    pub fn validate(&self) -> Result<()> {
        match self.kind {
            SimilarityKind::Prec | SimilarityKind::Overl if self.n == 0 => {
                Err(Error::invalid("n-gram similarity needs n >= 1"))
            }
            SimilarityKind::Bleu | SimilarityKind::SmoothedBleu if self.max_n == 0 => {
                Err(Error::invalid("BLEU similarity needs max_n >= 1"))
            }
            SimilarityKind::EmbedCosine if self.vectors.is_none() => {
                Err(Error::invalid("embed_cosine needs a vector table"))
            }
            _ => Ok(()),
        }
    }
}

impl FromStr for SimilaritySpec {
    type Err = Error;

    /// `prec_N`, `overl_N`, `bleu`, `bleu_N`, `smoothed_bleu`,
    /// `smoothed_bleu_N` (N = max order) or `embed_cosine` (the vector table
    /// is supplied separately).
    fn from_str(s: &str) -> Result<Self> {
        let bad = || Error::invalid(format!("unknown similarity {s:?}"));
        let num = |rest: &str| rest.parse::<usize>().ok().filter(|&n| n >= 1).ok_or_else(bad);
        let spec = if let Some(rest) = s.strip_prefix("prec_") {
            SimilaritySpec::prec(num(rest)?)
        } else if let Some(rest) = s.strip_prefix("overl_") {
            SimilaritySpec::overl(num(rest)?)
        } else if s == "smoothed_bleu" {
            SimilaritySpec::bleu(4, true)
        } else if let Some(rest) = s.strip_prefix("smoothed_bleu_") {
            SimilaritySpec::bleu(num(rest)?, true)
        } else if s == "bleu" {
            SimilaritySpec::bleu(4, false)
        } else if let Some(rest) = s.strip_prefix("bleu_") {
            SimilaritySpec::bleu(num(rest)?, false)
        } else if s == "embed_cosine" {
            SimilaritySpec::new(SimilarityKind::EmbedCosine)
        } else {
            return Err(bad());
        };
        Ok(spec)
    }
}

impl fmt::Display for SimilaritySpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.kind {
            SimilarityKind::Prec => write!(f, "prec_{}", self.n),
            SimilarityKind::Overl => write!(f, "overl_{}", self.n),
            SimilarityKind::Bleu if self.max_n == 4 => f.write_str("bleu"),
            SimilarityKind::Bleu => write!(f, "bleu_{}", self.max_n),
            SimilarityKind::SmoothedBleu if self.max_n == 4 => f.write_str("smoothed_bleu"),
            SimilarityKind::SmoothedBleu => write!(f, "smoothed_bleu_{}", self.max_n),
            SimilarityKind::EmbedCosine => f.write_str("embed_cosine"),
        }
    }
}

/// Token vectors indexed by id. Tokens without an entry use the zero vector.
#[derive(Debug, Clone, PartialEq)]
pub struct TokenVectors {
    dim: usize,
    by_id: Vec<Option<Vec<f64>>>,
}

impl TokenVectors {
    /// Builds a table from `(surface, vector)` pairs; surfaces outside the
    /// vocabulary are ignored.
    pub fn from_entries<S: AsRef<str>>(
        vocab: &Vocabulary,
        entries: impl IntoIterator<Item = (S, Vec<f64>)>,
    ) -> Result<Self> {
        let mut dim = None;
        let mut by_id = vec![None; vocab.len()];
        for (surface, vector) in entries {
            let d = *dim.get_or_insert(vector.len());
            if d == 0 || vector.len() != d {
                return Err(Error::parse(
                    "vector table",
                    format!("token {:?} has dimension {}, expected {d}", surface.as_ref(), vector.len()),
                ));
            }
            if vector.iter().any(|x| !x.is_finite()) {
                return Err(Error::parse("vector table", format!("non-finite value for {:?}", surface.as_ref())));
            }
            if let Some(id) = vocab.id(surface.as_ref()) {
                by_id[id as usize] = Some(vector);
            }
        }
        let dim = dim.ok_or(Error::Empty("vector table"))?;
        Ok(TokenVectors { dim, by_id })
    }

    /// Reads whitespace-separated lines `token v1 ... vd`.
    pub fn load(path: impl AsRef<Path>, vocab: &Vocabulary) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let mut entries = Vec::new();
        for (lineno, line) in text.lines().enumerate() {
            let mut parts = line.split_whitespace();
            let Some(token) = parts.next() else { continue };
            let vector = parts
                .map(|x| x.parse::<f64>())
                .collect::<std::result::Result<Vec<_>, _>>()
                .map_err(|e| Error::parse("vector table", format!("line {}: {e}", lineno + 1)))?;
            entries.push((token.to_string(), vector));
        }
        Self::from_entries(vocab, entries)
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    /// Arithmetic mean of the token vectors of `seq` (zero for empty input).
    pub fn mean(&self, seq: &[TokenId]) -> Vec<f64> {
        let mut acc = vec![0.0; self.dim];
        for &t in seq {
            if let Some(Some(v)) = self.by_id.get(t as usize) {
                for (a, x) in acc.iter_mut().zip(v) {
                    *a += x;
                }
            }
        }
        if !seq.is_empty() {
            let n = seq.len() as f64;
            acc.iter_mut().for_each(|a| *a /= n);
        }
        acc
    }
}

/// A resolved similarity `sim(v, c)` with values in `[0, 1]`; the first
/// argument is the voter, the second the candidate.
#[derive(Debug, Clone, PartialEq)]
pub enum Similarity {
    Prec(usize),
    Overl(usize),
    Bleu { max_n: usize, smoothed: bool },
    EmbedCosine(TokenVectors),
}

/// Per-sequence data precomputed once per vote.
#[derive(Debug, Clone)]
pub(crate) enum Profile {
    Bag(NGramBag),
    Set(NGramSet),
    Bags(Vec<NGramBag>, usize),
    Mean(Vec<f64>, f64),
}

impl Similarity {
    pub fn from_spec(spec: &SimilaritySpec, vocab: &Vocabulary) -> Result<Self> {
        spec.validate()?;
        Ok(match spec.kind {
            SimilarityKind::Prec => Similarity::Prec(spec.n),
            SimilarityKind::Overl => Similarity::Overl(spec.n),
            SimilarityKind::Bleu => Similarity::Bleu { max_n: spec.max_n, smoothed: false },
            SimilarityKind::SmoothedBleu => Similarity::Bleu { max_n: spec.max_n, smoothed: true },
            SimilarityKind::EmbedCosine => {
                let path = spec.vectors.as_ref().expect("validated");
                Similarity::EmbedCosine(TokenVectors::load(path, vocab)?)
            }
        })
    }

    pub fn score(&self, v: &[TokenId], c: &[TokenId]) -> f64 {
        self.score_profiles(&self.profile(v), &self.profile(c))
    }

    pub(crate) fn profile(&self, s: &[TokenId]) -> Profile {
        match self {
            Similarity::Prec(n) => Profile::Bag(ngram_bag(s, *n).expect("n >= 1")),
            Similarity::Overl(n) => Profile::Set(ngram_set(s, *n).expect("n >= 1")),
            Similarity::Bleu { max_n, .. } => Profile::Bags(
                (1..=*max_n).map(|n| ngram_bag(s, n).expect("n >= 1")).collect(),
                s.len(),
            ),
            Similarity::EmbedCosine(vectors) => {
                let mean = vectors.mean(s);
                let norm = mean.iter().map(|x| x * x).sum::<f64>().sqrt();
                Profile::Mean(mean, norm)
            }
        }
    }

    pub(crate) fn score_profiles(&self, v: &Profile, c: &Profile) -> f64 {
        match (self, v, c) {
            (Similarity::Prec(_), Profile::Bag(v), Profile::Bag(c)) => ratio(v.intersection_total(c), v.total()),
            (Similarity::Overl(_), Profile::Set(v), Profile::Set(c)) => ratio(v.intersection_len(c), v.len()),
            (Similarity::Bleu { smoothed, .. }, Profile::Bags(vb, vl), Profile::Bags(cb, cl)) => {
                BleuStats::from_bags(cb, *cl, vb, *vl).score(*smoothed)
            }
            (Similarity::EmbedCosine(_), Profile::Mean(a, na), Profile::Mean(b, nb)) => {
                if *na == 0.0 || *nb == 0.0 {
                    return 0.0;
                }
                let dot: f64 = a.iter().zip(b).map(|(x, y)| x * y).sum();
                let cos = (dot / (na * nb)).clamp(-1.0, 1.0);
                ((cos + 1.0) / 2.0).clamp(0.0, 1.0)
            }
            _ => unreachable!("profile built by a different similarity"),
        }
    }
}

fn ratio(num: usize, den: usize) -> f64 {
    if den == 0 {
        0.0
    } else {
        num as f64 / den as f64
    }
}

/// Fraction of the voter's n-gram occurrences matched in the candidate
/// (multiset intersection).
pub fn prec_sim(v: &[TokenId], c: &[TokenId], n: usize) -> Result<f64> {
    Ok(ratio(ngram_bag(v, n)?.intersection_total(&ngram_bag(c, n)?), ngram_bag(v, n)?.total()))
}

/// Fraction of the voter's distinct n-grams present in the candidate.
pub fn overl_sim(v: &[TokenId], c: &[TokenId], n: usize) -> Result<f64> {
    let vs = ngram_set(v, n)?;
    Ok(ratio(vs.intersection_len(&ngram_set(c, n)?), vs.len()))
}

/// Sentence BLEU of candidate `c` against the single reference `v`.
pub fn bleu_sim(v: &[TokenId], c: &[TokenId], max_n: usize, smoothed: bool) -> Result<f64> {
    crate::eval::sentence_bleu(c, v, max_n, smoothed)
}

/// Cosine of mean token vectors, rescaled to `[0, 1]`.
pub fn embed_cosine_sim(v: &[TokenId], c: &[TokenId], vectors: &TokenVectors) -> f64 {
    Similarity::EmbedCosine(vectors.clone()).score(v, c)
}
