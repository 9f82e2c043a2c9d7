//! Autoregressive sequence models.
//!
//! A model exposes next-token log-probabilities over its vocabulary plus the
//! end marker. The returned vector is indexed by token id; the begin marker
//! always carries `-inf`.

mod ngram;
mod tabular;

use std::path::Path;

pub use ngram::{train_ngram_lm, NGramLM, NGRAM_FORMAT, NGRAM_VERSION};
pub use tabular::{TabularModel, TABULAR_FORMAT, TABULAR_VERSION};

use crate::error::{Error, Result};
use crate::seq::{TokenId, Vocabulary, EOS};

pub trait SequenceModel: Send + Sync {
    fn vocab(&self) -> &Vocabulary;

    /// Conditional log-probabilities of every next outcome after `prefix`.
    fn next_token_logprobs(&self, prefix: &[TokenId], context: Option<&[TokenId]>) -> Result<Vec<f64>>;

    /// Whether text fed to this model should be lowercased before lookup.
    fn lowercase(&self) -> bool {
        false
    }
}

/// Chain-rule log-probability of `seq` followed by the end marker.
pub fn sequence_logprob<M: SequenceModel + ?Sized>(
    model: &M,
    seq: &[TokenId],
    context: Option<&[TokenId]>,
) -> Result<f64> {
    model.vocab().validate(seq)?;
    let mut total = 0.0;
    for i in 0..=seq.len() {
        let next = if i < seq.len() { seq[i] } else { EOS };
        let lp = model.next_token_logprobs(&seq[..i], context)?[next as usize];
        total += lp;
        if total == f64::NEG_INFINITY {
            break;
        }
    }
    Ok(total)
}

/// Either model kind, as loaded from a model file.
#[derive(Debug, Clone)]
pub enum AnyModel {
    NGram(NGramLM),
    Tabular(TabularModel),
}

impl AnyModel {
    /// Loads a model file, dispatching on its `format` field.
    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let value: serde_json::Value =
            serde_json::from_str(&text).map_err(|e| Error::parse(format!("model file {}", path.display()), e))?;
        match value.get("format").and_then(|f| f.as_str()) {
            Some(NGRAM_FORMAT) => NGramLM::from_json_value(value).map(AnyModel::NGram),
            Some(TABULAR_FORMAT) => TabularModel::from_json_value(value).map(AnyModel::Tabular),
            other => Err(Error::parse(
                format!("model file {}", path.display()),
                format!("unknown format {other:?}"),
            )),
        }
    }
}

impl AnyModel {
    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        match self {
            AnyModel::NGram(m) => m.save(path),
            AnyModel::Tabular(m) => m.save(path),
        }
    }
}

impl SequenceModel for AnyModel {
    fn vocab(&self) -> &Vocabulary {
        match self {
            AnyModel::NGram(m) => m.vocab(),
            AnyModel::Tabular(m) => m.vocab(),
        }
    }

    fn next_token_logprobs(&self, prefix: &[TokenId], context: Option<&[TokenId]>) -> Result<Vec<f64>> {
        match self {
            AnyModel::NGram(m) => m.next_token_logprobs(prefix, context),
            AnyModel::Tabular(m) => m.next_token_logprobs(prefix, context),
        }
    }

    fn lowercase(&self) -> bool {
        match self {
            AnyModel::NGram(m) => m.lowercase(),
            AnyModel::Tabular(m) => m.lowercase(),
        }
    }
}

impl From<NGramLM> for AnyModel {
    fn from(m: NGramLM) -> Self {
        AnyModel::NGram(m)
    }
}

impl From<TabularModel> for AnyModel {
    fn from(m: TabularModel) -> Self {
        AnyModel::Tabular(m)
    }
}

#[derive(serde::Deserialize)]
pub(crate) struct FileHeader {
    pub format: String,
    pub version: u32,
}

pub(crate) fn check_header(value: &serde_json::Value, format: &str, what: &'static str, expected: u32) -> Result<()> {
    let header: FileHeader = serde_json::from_value(value.clone()).map_err(|e| Error::parse(what, e))?;
    if header.format != format {
        return Err(Error::parse(what, format!("expected format {format:?}, found {:?}", header.format)));
    }
    if header.version != expected {
        return Err(Error::VersionMismatch {
            what,
            found: header.version,
            expected,
        });
    }
    Ok(())
}
