//! TOML experiment configuration (schema version 1).
//!
//! Relative paths are resolved against the directory holding the config
//! file. See `docs/formats.md` for an annotated example.

use std::path::{Path, PathBuf};
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::decode::{BeamParams, SamplingStrategy, ScoringMode};
use crate::error::{Error, Result};
use crate::eval::{EvalOptions, MetricSet};
use crate::oracle::DEFAULT_NODE_BUDGET;
use crate::voting::SimilaritySpec;

pub const CONFIG_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub version: u32,
    #[serde(default)]
    pub seed: Option<u64>,
    #[serde(default)]
    pub workers: Option<usize>,
    #[serde(default)]
    pub model: Option<ModelConfig>,
    #[serde(default)]
    pub dataset: Option<DatasetConfig>,
    #[serde(default)]
    pub decode: Vec<DecodeConfig>,
    #[serde(default)]
    pub select: Vec<SelectConfig>,
    #[serde(default)]
    pub output: OutputConfig,
    #[serde(default)]
    pub oracle: OracleConfig,
    #[serde(skip)]
    pub base_dir: PathBuf,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum ModelConfig {
    /// A saved model file of either kind.
    File { path: PathBuf },
    /// An inline table of `(text, prob)` entries.
    Tabular {
        entries: Vec<TabularEntry>,
        #[serde(default)]
        lowercase: bool,
    },
    /// Train an n-gram model on a text file, one sentence per line.
    Train {
        corpus: PathBuf,
        #[serde(default = "default_order")]
        order: usize,
        #[serde(default = "default_add_k")]
        add_k: f64,
        #[serde(default)]
        lowercase: bool,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TabularEntry {
    pub text: String,
    pub prob: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DatasetConfig {
    pub path: PathBuf,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum DecodeConfig {
    Beam {
        #[serde(default)]
        name: Option<String>,
        beam_size: usize,
        #[serde(default = "default_max_len")]
        max_len: usize,
        #[serde(default)]
        scoring: ScoringMode,
        #[serde(default)]
        diverse_gamma: f64,
        #[serde(default)]
        filter_copies: Option<f64>,
    },
    Sample {
        #[serde(default)]
        name: Option<String>,
        count: usize,
        #[serde(default = "default_strategy")]
        strategy: String,
        #[serde(default = "default_max_len")]
        max_len: usize,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum SelectConfig {
    /// Top of the candidate list.
    Map {
        #[serde(default)]
        name: Option<String>,
    },
    Vote {
        #[serde(default)]
        name: Option<String>,
        sim: String,
        #[serde(default)]
        vectors: Option<PathBuf>,
        #[serde(default = "default_voters")]
        voters: String,
        #[serde(default = "default_strategy")]
        voter_strategy: String,
        #[serde(default)]
        voter_max_len: Option<usize>,
    },
    /// Most probable sequence by enumeration (ignores the decode settings).
    ExactMap {
        #[serde(default)]
        name: Option<String>,
    },
    /// Range vote over the enumerated support (ignores the decode settings).
    ExactVote {
        #[serde(default)]
        name: Option<String>,
        sim: String,
        #[serde(default)]
        vectors: Option<PathBuf>,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputConfig {
    #[serde(default = "default_out_dir")]
    pub dir: PathBuf,
    #[serde(default = "default_metrics")]
    pub metrics: Vec<String>,
    #[serde(default = "default_max_n")]
    pub max_n: usize,
    #[serde(default = "default_copy_threshold")]
    pub copy_threshold: f64,
    #[serde(default)]
    pub contributions: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OracleConfig {
    #[serde(default = "default_max_len")]
    pub max_len: usize,
    #[serde(default = "default_budget")]
    pub budget: usize,
    #[serde(default)]
    pub floor: f64,
}

fn default_order() -> usize {
    3
}
fn default_add_k() -> f64 {
    0.1
}
fn default_max_len() -> usize {
    20
}
fn default_strategy() -> String {
    "ancestral".into()
}
fn default_voters() -> String {
    "same".into()
}
fn default_out_dir() -> PathBuf {
    PathBuf::from("out")
}
fn default_metrics() -> Vec<String> {
    vec!["all".into()]
}
fn default_max_n() -> usize {
    4
}
fn default_copy_threshold() -> f64 {
    0.5
}
fn default_budget() -> usize {
    DEFAULT_NODE_BUDGET
}

impl Default for OutputConfig {
    fn default() -> Self {
        OutputConfig {
            dir: default_out_dir(),
            metrics: default_metrics(),
            max_n: default_max_n(),
            copy_threshold: default_copy_threshold(),
            contributions: false,
        }
    }
}

impl Default for OracleConfig {
    fn default() -> Self {
        OracleConfig {
            max_len: default_max_len(),
            budget: default_budget(),
            floor: 0.0,
        }
    }
}

/// Where voters come from: `same`, `beam:K`, `sample:N` or `file:PATH`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum VoterSpec {
    Same,
    Beam(usize),
    Sample(usize),
    File(PathBuf),
}

impl FromStr for VoterSpec {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let bad = || Error::invalid(format!("invalid voter source {s:?}"));
        let (kind, arg) = s.split_once(':').unwrap_or((s, ""));
        let count = || arg.parse::<usize>().ok().filter(|&n| n >= 1).ok_or_else(bad);
        match kind {
            "same" if arg.is_empty() => Ok(VoterSpec::Same),
            "beam" => Ok(VoterSpec::Beam(count()?)),
            "sample" => Ok(VoterSpec::Sample(count()?)),
            "file" if !arg.is_empty() => Ok(VoterSpec::File(PathBuf::from(arg))),
            _ => Err(bad()),
        }
    }
}

impl std::fmt::Display for VoterSpec {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            VoterSpec::Same => f.write_str("same"),
            VoterSpec::Beam(k) => write!(f, "beam{k}"),
            VoterSpec::Sample(n) => write!(f, "sample{n}"),
            VoterSpec::File(p) => write!(
                f,
                "file-{}",
                p.file_stem().map(|s| s.to_string_lossy()).unwrap_or_default()
            ),
        }
    }
}

impl DecodeConfig {
    pub fn name(&self) -> String {
        match self {
            DecodeConfig::Beam { name: Some(n), .. } | DecodeConfig::Sample { name: Some(n), .. } => n.clone(),
            DecodeConfig::Beam {
                beam_size,
                scoring,
                diverse_gamma,
                filter_copies,
                ..
            } => {
                let mut s = format!("beam{beam_size}");
                if *scoring == ScoringMode::LengthNormalized {
                    s.push_str("-ln");
                }
                if *diverse_gamma > 0.0 {
                    s.push_str(&format!("-div{diverse_gamma}"));
                }
                if let Some(t) = filter_copies {
                    s.push_str(&format!("-nocopy{t}"));
                }
                s
            }
            DecodeConfig::Sample { count, strategy, .. } => {
                format!("sample{count}-{}", strategy.replace(':', ""))
            }
        }
    }

    pub fn max_len(&self) -> usize {
        match self {
            DecodeConfig::Beam { max_len, .. } | DecodeConfig::Sample { max_len, .. } => *max_len,
        }
    }

    /// Beam parameters without the copy filter, which needs each input's
    /// source and is attached per input.
    pub fn beam_params(&self) -> Option<BeamParams> {
        match self {
            DecodeConfig::Beam {
                beam_size,
                max_len,
                scoring,
                diverse_gamma,
                ..
            } => Some(BeamParams {
                beam_size: *beam_size,
                max_len: *max_len,
                scoring: *scoring,
                diverse_gamma: *diverse_gamma,
                copy_filter: None,
            }),
            DecodeConfig::Sample { .. } => None,
        }
    }

    pub fn validate(&self) -> Result<()> {
        match self {
            DecodeConfig::Beam { filter_copies, .. } => {
                self.beam_params().expect("beam").validate()?;
                if let Some(t) = filter_copies {
                    if !(0.0..=1.0).contains(t) {
                        return Err(Error::invalid("filter_copies must lie in [0, 1]"));
                    }
                }
                Ok(())
            }
            DecodeConfig::Sample {
                count,
                strategy,
                max_len,
                ..
            } => {
                if *count == 0 || *max_len == 0 {
                    return Err(Error::invalid("sampling needs count >= 1 and max_len >= 1"));
                }
                strategy.parse::<SamplingStrategy>().map(|_| ())
            }
        }
    }
}

impl SelectConfig {
    pub fn name(&self) -> Result<String> {
        Ok(match self {
            SelectConfig::Map { name: Some(n) }
            | SelectConfig::Vote { name: Some(n), .. }
            | SelectConfig::ExactMap { name: Some(n) }
            | SelectConfig::ExactVote { name: Some(n), .. } => n.clone(),
            SelectConfig::Map { .. } => "map".into(),
            SelectConfig::Vote { sim, voters, .. } => {
                format!("vote-{}-{}", sim.parse::<SimilaritySpec>()?, voters.parse::<VoterSpec>()?)
            }
            SelectConfig::ExactMap { .. } => "exact_map".into(),
            SelectConfig::ExactVote { sim, .. } => format!("exact_vote-{}", sim.parse::<SimilaritySpec>()?),
        })
    }

    /// The similarity spec with its vector table path attached.
    pub fn similarity(&self, base: &Path) -> Result<Option<SimilaritySpec>> {
        match self {
            SelectConfig::Vote { sim, vectors, .. } | SelectConfig::ExactVote { sim, vectors, .. } => {
                let mut spec: SimilaritySpec = sim.parse()?;
                spec.vectors = vectors.as_ref().map(|p| base.join(p));
                spec.validate()?;
                Ok(Some(spec))
            }
            _ => Ok(None),
        }
    }

    pub fn is_exact(&self) -> bool {
        matches!(self, SelectConfig::ExactMap { .. } | SelectConfig::ExactVote { .. })
    }
}

impl OutputConfig {
    pub fn eval_options(&self) -> Result<EvalOptions> {
        if !(0.0..=1.0).contains(&self.copy_threshold) {
            return Err(Error::invalid("copy_threshold must lie in [0, 1]"));
        }
        if self.max_n == 0 {
            return Err(Error::invalid("max_n must be at least 1"));
        }
        Ok(EvalOptions {
            max_n: self.max_n,
            copy_threshold: self.copy_threshold,
            metrics: self.metrics.join(",").parse::<MetricSet>()?,
        })
    }
}

impl ExperimentConfig {
    pub fn from_toml(text: &str, base_dir: impl Into<PathBuf>) -> Result<Self> {
        let mut cfg: ExperimentConfig = toml::from_str(text).map_err(|e| Error::parse("configuration", e))?;
        if cfg.version != CONFIG_VERSION {
            return Err(Error::VersionMismatch {
                what: "configuration",
                found: cfg.version,
                expected: CONFIG_VERSION,
            });
        }
        cfg.base_dir = base_dir.into();
        Ok(cfg)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let base = path.parent().map(Path::to_path_buf).unwrap_or_default();
        Self::from_toml(&text, base)
    }

    /// A configuration with defaults everywhere, for command lines without
    /// `--config`.
    pub fn empty() -> Self {
        ExperimentConfig {
            version: CONFIG_VERSION,
            seed: None,
            workers: None,
            model: None,
            dataset: None,
            decode: Vec::new(),
            select: Vec::new(),
            output: OutputConfig::default(),
            oracle: OracleConfig::default(),
            base_dir: PathBuf::new(),
        }
    }

    pub fn resolve(&self, p: &Path) -> PathBuf {
        self.base_dir.join(p)
    }

    /// Checks everything `run` needs before any work starts.
    pub fn validate_for_run(&self) -> Result<()> {
        if self.model.is_none() {
            return Err(Error::invalid("configuration has no [model]"));
        }
        if self.select.is_empty() {
            return Err(Error::invalid("configuration needs at least one [[select]] entry"));
        }
        if self.decode.is_empty() && self.select.iter().any(|s| !s.is_exact()) {
            return Err(Error::invalid("configuration needs at least one [[decode]] entry"));
        }
        let mut stochastic = false;
        for d in &self.decode {
            d.validate()?;
            stochastic |= matches!(d, DecodeConfig::Sample { .. });
        }
        for s in &self.select {
            s.name()?;
            s.similarity(&self.base_dir)?;
            if let SelectConfig::Vote {
                voters,
                voter_strategy,
                voter_max_len,
                ..
            } = s
            {
                let spec: VoterSpec = voters.parse()?;
                if matches!(spec, VoterSpec::Sample(_)) {
                    stochastic = true;
                    voter_strategy.parse::<SamplingStrategy>()?;
                }
                if *voter_max_len == Some(0) {
                    return Err(Error::invalid("voter_max_len must be at least 1"));
                }
            }
        }
        if stochastic && self.seed.is_none() {
            return Err(Error::invalid("a seed is required when sampling is configured"));
        }
        if self.workers == Some(0) {
            return Err(Error::invalid("workers must be at least 1"));
        }
        if self.oracle.max_len == 0 || !(self.oracle.floor >= 0.0) {
            return Err(Error::invalid("oracle needs max_len >= 1 and a non-negative floor"));
        }
        self.output.eval_options()?;
        let mut names = std::collections::HashSet::new();
        for d in &self.decode {
            if !names.insert(d.name()) {
                return Err(Error::invalid(format!("duplicate decode name {:?}", d.name())));
            }
        }
        let mut names = std::collections::HashSet::new();
        for s in &self.select {
            let n = s.name()?;
            if !names.insert(n.clone()) {
                return Err(Error::invalid(format!("duplicate select name {n:?}")));
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const TOY: &str = r#"
version = 1
seed = 7

[model]
kind = "tabular"
entries = [
  { text = "ok", prob = 0.30 },
  { text = "the tall man runs fast", prob = 0.18 },
]

[[decode]]
kind = "beam"
beam_size = 5
max_len = 10

[[select]]
kind = "map"

[[select]]
kind = "vote"
sim = "overl_1"
"#;

    #[test]
    fn parses_and_validates() {
        let cfg = ExperimentConfig::from_toml(TOY, "/tmp").unwrap();
        cfg.validate_for_run().unwrap();
        assert_eq!(cfg.decode[0].name(), "beam5");
        assert_eq!(cfg.select[1].name().unwrap(), "vote-overl_1-same");
        assert_eq!(cfg.output.max_n, 4);
        assert_eq!(cfg.oracle.budget, DEFAULT_NODE_BUDGET);
    }

    #[test]
    fn rejects_bad_configs() {
        let bad_sim = TOY.replace("overl_1", "cider");
        let cfg = ExperimentConfig::from_toml(&bad_sim, "").unwrap();
        assert!(matches!(cfg.validate_for_run(), Err(Error::InvalidArgument(_))));

        let bad_version = TOY.replace("version = 1", "version = 3");
        assert!(matches!(
            ExperimentConfig::from_toml(&bad_version, ""),
            Err(Error::VersionMismatch { found: 3, .. })
        ));

        let unknown_field = TOY.replace("seed = 7", "seed = 7\ncolour = 1");
        assert!(matches!(ExperimentConfig::from_toml(&unknown_field, ""), Err(Error::Parse { .. })));

        let sampling_without_seed = TOY.replace("seed = 7", "") + "\n[[decode]]\nkind = \"sample\"\ncount = 4\n";
        let cfg = ExperimentConfig::from_toml(&sampling_without_seed, "").unwrap();
        assert!(cfg.validate_for_run().is_err());
    }

    #[test]
    fn voter_specs() {
        assert_eq!("same".parse::<VoterSpec>().unwrap(), VoterSpec::Same);
        assert_eq!("beam:100".parse::<VoterSpec>().unwrap(), VoterSpec::Beam(100));
        assert_eq!("sample:20".parse::<VoterSpec>().unwrap(), VoterSpec::Sample(20));
        assert_eq!(
            "file:v.jsonl".parse::<VoterSpec>().unwrap(),
            VoterSpec::File(PathBuf::from("v.jsonl"))
        );
        for s in ["beam", "beam:0", "sample:x", "file:", "crowd"] {
            assert!(s.parse::<VoterSpec>().is_err(), "{s}");
        }
    }
}
