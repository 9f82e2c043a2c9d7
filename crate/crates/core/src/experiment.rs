//! Configuration-driven experiment runs.
//!
//! Every (decode setting × selection strategy) pair is one system. Each run
//! materializes candidate, voter, vote and output files under the output
//! directory, then writes `report.tsv` and `report.json`.

use std::collections::HashMap;
use std::path::{Path, PathBuf};

use rayon::prelude::*;

use crate::config::{DecodeConfig, ExperimentConfig, ModelConfig, SelectConfig, VoterSpec};
use crate::decode::{beam_search, BeamParams, sample_sequences, tie_break, CandidateSet, CopyFilter, Provenance, ScoredSequence};
use crate::error::{Error, Result};
use crate::eval::{evaluate_system, EvalOptions, EvalReport};
use crate::io::{read_candidates, read_dataset, write_jsonl, write_text, CandidateEntry, CandidateRecord, DatasetRecord};
use crate::models::{AnyModel, NGramLM, SequenceModel, TabularModel};
use crate::oracle::{enumerate_distribution, EnumerateOptions};
use crate::seq::{Sequence, Vocabulary};
use crate::voting::{range_vote, Similarity, VoteResult};

pub fn build_model(cfg: &ExperimentConfig) -> Result<AnyModel> {
    match cfg.model.as_ref().ok_or_else(|| Error::invalid("configuration has no [model]"))? {
        ModelConfig::File { path } => AnyModel::load(cfg.resolve(path)),
        ModelConfig::Tabular { entries, lowercase } => {
            let pairs: Vec<(&str, f64)> = entries.iter().map(|e| (e.text.as_str(), e.prob)).collect();
            TabularModel::from_texts(&pairs, *lowercase).map(AnyModel::from)
        }
        ModelConfig::Train {
            corpus,
            order,
            add_k,
            lowercase,
        } => {
            let path = cfg.resolve(corpus);
            let text = std::fs::read_to_string(&path).map_err(|e| Error::io(&path, e))?;
            let lines: Vec<&str> = text.lines().filter(|l| !l.trim().is_empty()).collect();
            NGramLM::train_from_texts(&lines, *order, *add_k, *lowercase).map(AnyModel::from)
        }
    }
}

/// Dataset records, or a single unconditional input when no dataset is set.
pub fn load_inputs(cfg: &ExperimentConfig) -> Result<Vec<DatasetRecord>> {
    match &cfg.dataset {
        Some(d) => {
            let records = read_dataset(cfg.resolve(&d.path))?;
            if records.is_empty() {
                return Err(Error::Empty("dataset"));
            }
            Ok(records)
        }
        None => Ok(vec![DatasetRecord {
            id: "0".into(),
            source: None,
            references: Vec::new(),
        }]),
    }
}

/// Mixes `parts` into `base` with the SplitMix64 finalizer, giving
/// independent streams per input and setting.
pub fn derive_seed(base: u64, parts: &[u64]) -> u64 {
    let mut x = base;
    for &p in parts {
        x = x.wrapping_add(0x9E37_79B9_7F4A_7C15).wrapping_add(p.wrapping_mul(0xD1B5_4A32_D192_ED03));
        x = (x ^ (x >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
        x = (x ^ (x >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
        x ^= x >> 31;
    }
    x
}

pub fn generate_candidates<M: SequenceModel + ?Sized>(
    model: &M,
    decode: &DecodeConfig,
    source: Option<&Sequence>,
    seed: u64,
) -> Result<CandidateSet> {
    match decode {
        DecodeConfig::Beam { filter_copies, .. } => {
            let mut params = decode.beam_params().expect("beam");
            if let Some(threshold) = filter_copies {
                let source = source.ok_or_else(|| Error::invalid("copy filtering needs a source for every input"))?;
                params.copy_filter = Some(CopyFilter {
                    source: source.clone(),
                    threshold: *threshold,
                });
            }
            beam_search(model, source.map(|s| s.ids()), &params)
        }
        DecodeConfig::Sample {
            count,
            strategy,
            max_len,
            ..
        } => sample_sequences(model, source.map(|s| s.ids()), *count, strategy.parse()?, seed, *max_len),
    }
}

/// The MAP baseline: the top of a beam (in its own scoring order), or the
/// most probable member of any other set.
pub fn map_select(set: &CandidateSet) -> Option<&ScoredSequence> {
    match set.provenance {
        Provenance::Beam { .. } => set.items.first(),
        Provenance::Filtered { ref from, .. } if matches!(**from, Provenance::Beam { .. }) => set.items.first(),
        _ => set
            .items
            .iter()
            .min_by(|a, b| tie_break(a.logprob, &a.seq, b.logprob, &b.seq)),
    }
}

fn sanitize(name: &str) -> String {
    name.chars()
        .map(|c| if c.is_ascii_alphanumeric() || "._+-".contains(c) { c } else { '_' })
        .collect()
}

struct Input {
    record: DatasetRecord,
    source: Option<Sequence>,
}

/// One selected output per input, with the vote when there was one.
struct SystemRun {
    name: String,
    outputs: Vec<ScoredSequence>,
    votes: Option<Vec<VoteResult>>,
    voters: Option<Vec<CandidateSet>>,
}

#[derive(Debug, Clone)]
pub struct RunSummary {
    pub report: EvalReport,
    pub out_dir: PathBuf,
    pub files: Vec<PathBuf>,
}

pub fn run_experiment(cfg: &ExperimentConfig) -> Result<RunSummary> {
    cfg.validate_for_run()?;
    let mut builder = rayon::ThreadPoolBuilder::new();
    if let Some(w) = cfg.workers {
        builder = builder.num_threads(w);
    }
    let pool = builder
        .build()
        .map_err(|e| Error::invalid(format!("cannot start worker pool: {e}")))?;
    pool.install(|| run_in_pool(cfg))
}

fn run_in_pool(cfg: &ExperimentConfig) -> Result<RunSummary> {
    let model = build_model(cfg)?;
    let vocab = model.vocab();
    let lowercase = model.lowercase();
    let seed = cfg.seed.unwrap_or(0);
    let inputs: Vec<Input> = load_inputs(cfg)?
        .into_iter()
        .map(|record| {
            let source = record.source.as_deref().map(|s| vocab.tokenize(s, lowercase));
            Input { record, source }
        })
        .collect();
    let out_dir = cfg.resolve(&cfg.output.dir);
    let mut files = Vec::new();
    let mut systems: Vec<SystemRun> = Vec::new();

    for (j, decode) in cfg.decode.iter().enumerate() {
        let dname = decode.name();
        let candidates: Vec<CandidateSet> = inputs
            .par_iter()
            .enumerate()
            .map(|(i, inp)| generate_candidates(&model, decode, inp.source.as_ref(), derive_seed(seed, &[0, j as u64, i as u64])))
            .collect::<Result<_>>()?;
        let path = out_dir.join("candidates").join(format!("{}.jsonl", sanitize(&dname)));
        let records: Vec<CandidateRecord> = inputs
            .iter()
            .zip(&candidates)
            .map(|(inp, set)| CandidateRecord::from_set(&inp.record.id, inp.record.source.as_deref(), set, vocab))
            .collect();
        write_jsonl(&path, &records)?;
        files.push(path);

        for (s, select) in cfg.select.iter().enumerate() {
            if select.is_exact() {
                continue;
            }
            let name = format!("{dname}+{}", select.name()?);
            let run = match select {
                SelectConfig::Map { .. } => {
                    let outputs = candidates
                        .iter()
                        .map(|set| map_select(set).cloned().ok_or(Error::Empty("candidate set after copy filtering")))
                        .collect::<Result<_>>()?;
                    SystemRun {
                        name,
                        outputs,
                        votes: None,
                        voters: None,
                    }
                }
                SelectConfig::Vote {
                    voters,
                    voter_strategy,
                    voter_max_len,
                    ..
                } => {
                    let spec = select.similarity(&cfg.base_dir)?.expect("vote similarity");
                    let sim = Similarity::from_spec(&spec, vocab)?;
                    let voter_spec: VoterSpec = voters.parse()?;
                    let file_voters = match &voter_spec {
                        VoterSpec::File(p) => Some(voter_file(&cfg.resolve(p))?),
                        _ => None,
                    };
                    let vmax = voter_max_len.unwrap_or(decode.max_len());
                    let results: Vec<(CandidateSet, VoteResult)> = inputs
                        .par_iter()
                        .zip(&candidates)
                        .enumerate()
                        .map(|(i, (inp, cands))| {
                            if cands.is_empty() {
                                return Err(Error::Empty("candidate set after copy filtering"));
                            }
                            let context = inp.source.as_ref().map(|s| s.ids());
                            let voter_set = match &voter_spec {
                                VoterSpec::Same => cands.clone(),
                                VoterSpec::Beam(k) => {
                                    beam_search(&model, context, &BeamParams::new(*k, vmax))?
                                }
                                VoterSpec::Sample(n) => sample_sequences(
                                    &model,
                                    context,
                                    *n,
                                    voter_strategy.parse()?,
                                    derive_seed(seed, &[1, j as u64, s as u64, i as u64]),
                                    vmax,
                                )?,
                                VoterSpec::File(p) => file_voters
                                    .as_ref()
                                    .and_then(|m| m.get(&inp.record.id))
                                    .map(|r| r.to_set(vocab))
                                    .ok_or_else(|| {
                                        Error::invalid(format!(
                                            "voter file {} has no record {:?}",
                                            p.display(),
                                            inp.record.id
                                        ))
                                    })?,
                            };
                            let vote = range_vote(cands, &voter_set, &sim, cfg.output.contributions)?;
                            Ok((voter_set, vote))
                        })
                        .collect::<Result<_>>()?;
                    let (voter_sets, votes): (Vec<_>, Vec<_>) = results.into_iter().unzip();
                    let outputs = votes
                        .iter()
                        .map(|v: &VoteResult| ScoredSequence::new(v.winner().seq.clone(), v.winner().logprob))
                        .collect();
                    SystemRun {
                        name,
                        outputs,
                        votes: Some(votes),
                        voters: (voter_spec != VoterSpec::Same).then_some(voter_sets),
                    }
                }
                SelectConfig::ExactMap { .. } | SelectConfig::ExactVote { .. } => unreachable!(),
            };
            systems.push(run);
        }
    }

    for select in cfg.select.iter().filter(|s| s.is_exact()) {
        let name = select.name()?;
        let o = &cfg.oracle;
        let sim = match select.similarity(&cfg.base_dir)? {
            Some(spec) => Similarity::from_spec(&spec, vocab)?,
            None => Similarity::Prec(1),
        };
        let opts = EnumerateOptions::new(o.max_len).with_floor(o.floor).with_budget(o.budget);
        let results: Vec<(ScoredSequence, Option<VoteResult>)> = inputs
            .par_iter()
            .map(|inp| {
                let context = inp.source.as_ref().map(|s| s.ids());
                let dist = enumerate_distribution(&model, context, &opts)?;
                match select {
                    SelectConfig::ExactVote { .. } => {
                        let vote = range_vote(&dist.entries, &dist.entries, &sim, cfg.output.contributions)?;
                        let w = vote.winner();
                        Ok((ScoredSequence::new(w.seq.clone(), w.logprob), Some(vote)))
                    }
                    _ => dist
                        .entries
                        .first()
                        .cloned()
                        .map(|e| (e, None))
                        .ok_or(Error::Empty("enumerated support")),
                }
            })
            .collect::<Result<_>>()?;
        let (outputs, votes): (Vec<_>, Vec<_>) = results.into_iter().unzip();
        systems.push(SystemRun {
            name,
            outputs,
            votes: votes.into_iter().collect(),
            voters: None,
        });
    }

    for sys in &systems {
        let stem = sanitize(&sys.name);
        if let Some(voters) = &sys.voters {
            let path = out_dir.join("voters").join(format!("{stem}.jsonl"));
            let records: Vec<_> = inputs
                .iter()
                .zip(voters)
                .map(|(inp, set)| CandidateRecord::from_set(&inp.record.id, inp.record.source.as_deref(), set, vocab))
                .collect();
            write_jsonl(&path, &records)?;
            files.push(path);
        }
        if let Some(votes) = &sys.votes {
            let path = out_dir.join("votes").join(format!("{stem}.jsonl"));
            let records: Vec<_> = inputs
                .iter()
                .zip(votes)
                .map(|(inp, v)| CandidateRecord::from_vote(&inp.record.id, inp.record.source.as_deref(), v, vocab))
                .collect();
            write_jsonl(&path, &records)?;
            files.push(path);
        }
        let path = out_dir.join("outputs").join(format!("{stem}.jsonl"));
        let records: Vec<_> = inputs
            .iter()
            .zip(&sys.outputs)
            .map(|(inp, o)| CandidateRecord {
                id: inp.record.id.clone(),
                source: inp.record.source.clone(),
                candidates: vec![CandidateEntry {
                    tokens: vocab.surfaces(&o.seq).map(str::to_string).collect(),
                    logprob: o.logprob,
                    score: None,
                }],
                provenance: None,
                contributions: None,
            })
            .collect();
        write_jsonl(&path, &records)?;
        files.push(path);
    }

    let dataset: Vec<DatasetRecord> = inputs.iter().map(|i| i.record.clone()).collect();
    let surfaces: Vec<(String, Vec<Vec<String>>)> = systems
        .iter()
        .map(|s| {
            let outs = s
                .outputs
                .iter()
                .map(|o| vocab.surfaces(&o.seq).map(str::to_string).collect())
                .collect();
            (s.name.clone(), outs)
        })
        .collect();
    let report = evaluate_surfaces(&surfaces, &dataset, &cfg.output.eval_options()?, lowercase)?;
    for (name, text) in [("report.tsv", report.to_tsv()), ("report.json", report.to_json())] {
        let path = out_dir.join(name);
        write_text(&path, &text)?;
        files.push(path);
    }
    Ok(RunSummary { report, out_dir, files })
}

fn voter_file(path: &Path) -> Result<HashMap<String, CandidateRecord>> {
    Ok(read_candidates(path)?.into_iter().map(|r| (r.id.clone(), r)).collect())
}

/// Token lists of each system's outputs, aligned with `dataset`.
pub type SystemOutputs = (String, Vec<Vec<String>>);

/// Evaluates systems given as surface tokens. References (and sources) are
/// used only when every record has them. All texts share one vocabulary so
/// unknown words still match exactly.
pub fn evaluate_surfaces(
    systems: &[SystemOutputs],
    dataset: &[DatasetRecord],
    opts: &EvalOptions,
    lowercase: bool,
) -> Result<EvalReport> {
    let texts = systems
        .iter()
        .flat_map(|(_, outs)| outs.iter().map(|o| o.join(" ")))
        .chain(dataset.iter().flat_map(|r| r.references.iter().cloned()))
        .chain(dataset.iter().filter_map(|r| r.source.clone()));
    let vocab = Vocabulary::from_texts(texts, lowercase);
    let refs: Option<Vec<Vec<Sequence>>> = (!dataset.is_empty() && dataset.iter().all(|r| !r.references.is_empty()))
        .then(|| {
            dataset
                .iter()
                .map(|r| r.references.iter().map(|t| vocab.tokenize(t, lowercase)).collect())
                .collect()
        });
    let sources: Option<Vec<Sequence>> = (!dataset.is_empty() && dataset.iter().all(|r| r.source.is_some()))
        .then(|| {
            dataset
                .iter()
                .map(|r| vocab.tokenize(r.source.as_deref().unwrap_or(""), lowercase))
                .collect()
        });
    let mut report = EvalReport::new(opts.max_n);
    for (name, outs) in systems {
        if outs.len() != dataset.len() {
            return Err(Error::invalid(format!(
                "system {name:?} has {} outputs for {} inputs",
                outs.len(),
                dataset.len()
            )));
        }
        let seqs: Vec<Sequence> = outs.iter().map(|o| vocab.encode(o)).collect();
        report
            .rows
            .push(evaluate_system(name, &seqs, refs.as_deref(), sources.as_deref(), opts)?);
    }
    Ok(report)
}

/// Aligns a candidates or vote file with the dataset and takes the first
/// candidate of each record as the output.
pub fn outputs_from_records(records: &[CandidateRecord], dataset: &[DatasetRecord], what: &str) -> Result<Vec<Vec<String>>> {
    let by_id: HashMap<&str, &CandidateRecord> = records.iter().map(|r| (r.id.as_str(), r)).collect();
    dataset
        .iter()
        .map(|d| {
            let rec = by_id
                .get(d.id.as_str())
                .ok_or_else(|| Error::invalid(format!("{what} has no record {:?}", d.id)))?;
            let out = rec
                .output()
                .ok_or_else(|| Error::invalid(format!("{what} record {:?} has no candidates", d.id)))?;
            Ok(out.tokens.clone())
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn seeds_differ_per_part() {
        let a = derive_seed(1, &[0, 0, 0]);
        assert_eq!(a, derive_seed(1, &[0, 0, 0]));
        assert_ne!(a, derive_seed(1, &[0, 0, 1]));
        assert_ne!(a, derive_seed(1, &[0, 1, 0]));
        assert_ne!(a, derive_seed(2, &[0, 0, 0]));
    }

    #[test]
    fn surface_evaluation_keeps_unknown_words_distinct() {
        let dataset = vec![DatasetRecord {
            id: "1".into(),
            source: None,
            references: vec!["alpha beta".into()],
        }];
        let systems = vec![
            ("good".to_string(), vec![vec!["alpha".to_string(), "beta".to_string()]]),
            ("bad".to_string(), vec![vec!["gamma".to_string(), "delta".to_string()]]),
        ];
        let opts = EvalOptions { max_n: 2, ..Default::default() };
        let r = evaluate_surfaces(&systems, &dataset, &opts, false).unwrap();
        assert_eq!(r.rows[0].bleu.as_ref().unwrap()[1], 1.0);
        assert_eq!(r.rows[1].bleu.as_ref().unwrap()[0], 0.0);
        assert_eq!(r.rows[0].exact_copy_rate, None);
    }
}
