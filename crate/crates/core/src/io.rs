//! Line-delimited JSON files exchanged between pipeline stages.
//!
//! * dataset: `{"id", "source"?, "references": [string]}`
//! * candidates, voters and votes share one shape:
//!   `{"id", "source"?, "candidates": [{"tokens": [string], "logprob", "score"?}], ...}`
//!
//! A log-probability of `-inf` is written as `null`. Vote files list
//! candidates by descending score, so the first candidate of every record is
//! the system output for both decode and vote files.

use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use serde::de::DeserializeOwned;
use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::decode::{CandidateSet, Provenance, ScoredSequence};
use crate::error::{Error, Result};
use crate::seq::{Sequence, Vocabulary};
use crate::voting::VoteResult;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetRecord {
    pub id: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub source: Option<String>,
    #[serde(default)]
    pub references: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CandidateEntry {
    pub tokens: Vec<String>,
    #[serde(serialize_with = "ser_logprob", deserialize_with = "de_logprob")]
    pub logprob: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub score: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CandidateRecord {
    pub id: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub source: Option<String>,
    pub candidates: Vec<CandidateEntry>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub provenance: Option<Provenance>,
    /// Vote files only: `contributions[i][j]` is the contribution of voter
    /// `j` to the `i`-th listed candidate.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub contributions: Option<Vec<Vec<f64>>>,
}

fn ser_logprob<S: Serializer>(lp: &f64, s: S) -> std::result::Result<S::Ok, S::Error> {
    if lp.is_finite() {
        s.serialize_f64(*lp)
    } else {
        s.serialize_none()
    }
}

fn de_logprob<'de, D: Deserializer<'de>>(d: D) -> std::result::Result<f64, D::Error> {
    Ok(Option::<f64>::deserialize(d)?.unwrap_or(f64::NEG_INFINITY))
}

impl CandidateRecord {
    pub fn from_set(id: &str, source: Option<&str>, set: &CandidateSet, vocab: &Vocabulary) -> Self {
        CandidateRecord {
            id: id.to_string(),
            source: source.map(str::to_string),
            candidates: set.iter().map(|s| entry(vocab, &s.seq, s.logprob, None)).collect(),
            provenance: Some(set.provenance.clone()),
            contributions: None,
        }
    }

    /// Ranked candidates with their scores; contribution rows follow the
    /// ranking.
    pub fn from_vote(id: &str, source: Option<&str>, vote: &VoteResult, vocab: &Vocabulary) -> Self {
        CandidateRecord {
            id: id.to_string(),
            source: source.map(str::to_string),
            candidates: vote
                .ranked
                .iter()
                .map(|r| entry(vocab, &r.seq, r.logprob, Some(r.score)))
                .collect(),
            provenance: None,
            contributions: vote
                .contributions
                .as_ref()
                .map(|m| vote.ranked.iter().map(|r| m[r.index].clone()).collect()),
        }
    }

    pub fn to_set(&self, vocab: &Vocabulary) -> CandidateSet {
        let items = self
            .candidates
            .iter()
            .map(|c| ScoredSequence::new(vocab.encode(&c.tokens), c.logprob))
            .collect();
        CandidateSet::new(items, self.provenance.clone().unwrap_or(Provenance::External))
    }

    /// The system output: the first listed candidate.
    pub fn output(&self) -> Option<&CandidateEntry> {
        self.candidates.first()
    }
}

fn entry(vocab: &Vocabulary, seq: &Sequence, logprob: f64, score: Option<f64>) -> CandidateEntry {
    CandidateEntry {
        tokens: vocab.surfaces(seq).map(str::to_string).collect(),
        logprob,
        score,
    }
}

pub fn read_jsonl<T: DeserializeOwned>(path: impl AsRef<Path>) -> Result<Vec<T>> {
    let path = path.as_ref();
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    let mut out = Vec::new();
    for (i, line) in BufReader::new(file).lines().enumerate() {
        let line = line.map_err(|e| Error::io(path, e))?;
        if line.trim().is_empty() {
            continue;
        }
        let item = serde_json::from_str(&line)
            .map_err(|e| Error::parse(format!("{} line {}", path.display(), i + 1), e))?;
        out.push(item);
    }
    Ok(out)
}

pub fn write_jsonl<T: Serialize>(path: impl AsRef<Path>, items: &[T]) -> Result<()> {
    let path = path.as_ref();
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    }
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = BufWriter::new(file);
    for item in items {
        serde_json::to_writer(&mut w, item).map_err(|e| Error::parse("output record", e))?;
        w.write_all(b"\n").map_err(|e| Error::io(path, e))?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

pub fn write_text(path: impl AsRef<Path>, text: &str) -> Result<()> {
    let path = path.as_ref();
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    }
    std::fs::write(path, text).map_err(|e| Error::io(path, e))
}

/// Reads a dataset and rejects duplicate ids.
pub fn read_dataset(path: impl AsRef<Path>) -> Result<Vec<DatasetRecord>> {
    let records: Vec<DatasetRecord> = read_jsonl(path.as_ref())?;
    let mut seen = std::collections::HashSet::new();
    for r in &records {
        if !seen.insert(r.id.as_str()) {
            return Err(Error::parse(
                format!("dataset {}", path.as_ref().display()),
                format!("duplicate id {:?}", r.id),
            ));
        }
    }
    Ok(records)
}

pub fn read_candidates(path: impl AsRef<Path>) -> Result<Vec<CandidateRecord>> {
    read_jsonl(path)
}

/// A vocabulary covering every token of the given records, for voting on
/// files without a model.
pub fn vocabulary_from_records<'a>(records: impl IntoIterator<Item = &'a CandidateRecord>) -> Vocabulary {
    Vocabulary::from_texts(
        records
            .into_iter()
            .flat_map(|r| r.candidates.iter())
            .map(|c| c.tokens.join(" ")),
        false,
    )
}
