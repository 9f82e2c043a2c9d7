//! Corpus metrics, significance tests and the per-system report.

mod bleu;
mod stats;

use std::collections::HashSet;
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

pub use bleu::{brevity_penalty, corpus_bleu, corpus_stats, sentence_bleu, BleuStats};
pub use stats::{paired_bootstrap, sign_test, BootstrapMetric};

use crate::decode::is_partial_copy;
use crate::error::{Error, Result};
use crate::seq::{Sequence, TokenId};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DistinctStats {
    pub sequences: usize,
    pub unigrams: usize,
    pub bigrams: usize,
    pub avg_length: f64,
}

/// Distinct sequences and n-gram types pooled over all outputs, plus the
/// mean output length in tokens.
pub fn distinct_stats(outputs: &[Sequence]) -> Result<DistinctStats> {
    if outputs.is_empty() {
        return Err(Error::Empty("output list"));
    }
    let sequences: HashSet<&[TokenId]> = outputs.iter().map(|s| s.ids()).collect();
    let unigrams: HashSet<TokenId> = outputs.iter().flat_map(|s| s.iter().copied()).collect();
    let bigrams: HashSet<(TokenId, TokenId)> = outputs
        .iter()
        .flat_map(|s| s.windows(2).map(|w| (w[0], w[1])))
        .collect();
    let total: usize = outputs.iter().map(|s| s.len()).sum();
    Ok(DistinctStats {
        sequences: sequences.len(),
        unigrams: unigrams.len(),
        bigrams: bigrams.len(),
        avg_length: total as f64 / outputs.len() as f64,
    })
}

/// Fractions of outputs that are exact copies of their source and that are
/// partial copies at `threshold` (exact copies count as partial).
pub fn copy_rates(outputs: &[Sequence], sources: &[Sequence], threshold: f64) -> Result<(f64, f64)> {
    if outputs.len() != sources.len() {
        return Err(Error::invalid(format!(
            "{} outputs but {} sources",
            outputs.len(),
            sources.len()
        )));
    }
    if outputs.is_empty() {
        return Err(Error::Empty("output list"));
    }
    if !(0.0..=1.0).contains(&threshold) {
        return Err(Error::invalid(format!("copy threshold must lie in [0, 1], got {threshold}")));
    }
    let mut exact = 0usize;
    let mut partial = 0usize;
    for (o, s) in outputs.iter().zip(sources) {
        let is_exact = o == s;
        exact += is_exact as usize;
        partial += (is_exact || is_partial_copy(o, s, threshold)) as usize;
    }
    let n = outputs.len() as f64;
    Ok((exact as f64 / n, partial as f64 / n))
}

/// Per-segment comparison of two systems by smoothed sentence BLEU against
/// each segment's references; ties are discarded. Returns `(wins_a, wins_b)`.
pub fn segment_wins(
    hyps_a: &[Sequence],
    hyps_b: &[Sequence],
    refs: &[Vec<Sequence>],
    max_n: usize,
) -> Result<(u64, u64)> {
    if hyps_a.len() != hyps_b.len() || hyps_a.len() != refs.len() {
        return Err(Error::invalid("segment comparison needs aligned outputs and references"));
    }
    let mut wins = (0, 0);
    for ((a, b), rs) in hyps_a.iter().zip(hyps_b).zip(refs) {
        let rs: Vec<&[TokenId]> = rs.iter().map(|r| r.ids()).collect();
        let sa = BleuStats::segment(a, &rs, max_n)?.score(true);
        let sb = BleuStats::segment(b, &rs, max_n)?.score(true);
        if sa > sb {
            wins.0 += 1;
        } else if sb > sa {
            wins.1 += 1;
        }
    }
    Ok(wins)
}

/// Which metric groups to compute; skipped groups are reported as missing.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct MetricSet {
    pub bleu: bool,
    pub length: bool,
    pub distinct: bool,
    pub copies: bool,
}

impl Default for MetricSet {
    fn default() -> Self {
        MetricSet {
            bleu: true,
            length: true,
            distinct: true,
            copies: true,
        }
    }
}

impl std::str::FromStr for MetricSet {
    type Err = Error;

    /// Comma-separated subset of `bleu`, `length`, `distinct`, `copies`, or `all`.
    fn from_str(s: &str) -> Result<Self> {
        let mut set = MetricSet {
            bleu: false,
            length: false,
            distinct: false,
            copies: false,
        };
        for part in s.split(',').map(str::trim).filter(|p| !p.is_empty()) {
            match part {
                "all" => set = MetricSet::default(),
                "bleu" => set.bleu = true,
                "length" => set.length = true,
                "distinct" => set.distinct = true,
                "copies" => set.copies = true,
                other => return Err(Error::invalid(format!("unknown metric {other:?}"))),
            }
        }
        Ok(set)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EvalOptions {
    pub max_n: usize,
    pub copy_threshold: f64,
    pub metrics: MetricSet,
}

impl Default for EvalOptions {
    fn default() -> Self {
        EvalOptions {
            max_n: 4,
            copy_threshold: 0.5,
            metrics: MetricSet::default(),
        }
    }
}

/// One system's row. `bleu[i]` is corpus BLEU-(i+1); missing values mean
/// the metric was not requested or its inputs (references, sources) were
/// unavailable.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SystemRow {
    pub system: String,
    pub n_outputs: usize,
    pub bleu: Option<Vec<f64>>,
    pub avg_length: Option<f64>,
    pub distinct_sequences: Option<usize>,
    pub distinct_unigrams: Option<usize>,
    pub distinct_bigrams: Option<usize>,
    pub exact_copy_rate: Option<f64>,
    pub partial_copy_rate: Option<f64>,
}

pub fn evaluate_system(
    name: &str,
    outputs: &[Sequence],
    refs: Option<&[Vec<Sequence>]>,
    sources: Option<&[Sequence]>,
    opts: &EvalOptions,
) -> Result<SystemRow> {
    if opts.max_n == 0 {
        return Err(Error::invalid("BLEU max_n must be at least 1"));
    }
    let mut row = SystemRow {
        system: name.to_string(),
        n_outputs: outputs.len(),
        bleu: None,
        avg_length: None,
        distinct_sequences: None,
        distinct_unigrams: None,
        distinct_bigrams: None,
        exact_copy_rate: None,
        partial_copy_rate: None,
    };
    if opts.metrics.bleu {
        if let Some(refs) = refs {
            let bleu = (1..=opts.max_n)
                .map(|n| corpus_bleu(outputs, refs, n))
                .collect::<Result<Vec<_>>>()?;
            row.bleu = Some(bleu);
        }
    }
    if opts.metrics.length || opts.metrics.distinct {
        let d = distinct_stats(outputs)?;
        if opts.metrics.length {
            row.avg_length = Some(d.avg_length);
        }
        if opts.metrics.distinct {
            row.distinct_sequences = Some(d.sequences);
            row.distinct_unigrams = Some(d.unigrams);
            row.distinct_bigrams = Some(d.bigrams);
        }
    }
    if opts.metrics.copies {
        if let Some(sources) = sources {
            let (e, p) = copy_rates(outputs, sources, opts.copy_threshold)?;
            row.exact_copy_rate = Some(e);
            row.partial_copy_rate = Some(p);
        }
    }
    Ok(row)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub max_n: usize,
    pub rows: Vec<SystemRow>,
}

impl EvalReport {
    pub fn new(max_n: usize) -> Self {
        EvalReport { max_n, rows: Vec::new() }
    }

    pub fn columns(&self) -> Vec<String> {
        let mut cols = vec!["system".to_string(), "n_outputs".to_string()];
        cols.extend((1..=self.max_n).map(|n| format!("bleu_{n}")));
        cols.extend(
            [
                "avg_len",
                "distinct_seq",
                "distinct_uni",
                "distinct_bi",
                "exact_copy",
                "partial_copy",
            ]
            .map(String::from),
        );
        cols
    }

    /// Tab-separated table with a header line; missing values print as `NA`.
    pub fn to_tsv(&self) -> String {
        fn opt<T: ToString>(v: Option<T>) -> String {
            v.map_or_else(|| "NA".to_string(), |v| v.to_string())
        }
        fn real(v: Option<f64>) -> String {
            opt(v.map(|x| format!("{x:.6}")))
        }
        let mut out = self.columns().join("\t");
        out.push('\n');
        for r in &self.rows {
            let mut fields = vec![r.system.replace(['\t', '\n'], " "), r.n_outputs.to_string()];
            for i in 0..self.max_n {
                fields.push(real(r.bleu.as_ref().and_then(|b| b.get(i).copied())));
            }
            fields.push(real(r.avg_length));
            fields.push(opt(r.distinct_sequences));
            fields.push(opt(r.distinct_unigrams));
            fields.push(opt(r.distinct_bigrams));
            fields.push(real(r.exact_copy_rate));
            fields.push(real(r.partial_copy_rate));
            let _ = writeln!(out, "{}", fields.join("\t"));
        }
        out
    }

    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("report serializes");
        s.push('\n');
        s
    }
}
