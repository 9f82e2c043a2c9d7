use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use rangevote::config::{DecodeConfig, ExperimentConfig, ModelConfig, SelectConfig, VoterSpec};
use rangevote::decode::{beam_search, sample_sequences, BeamParams, CandidateSet, ScoringMode};
use rangevote::eval::{paired_bootstrap, segment_wins, sign_test, BootstrapMetric, EvalOptions, MetricSet};
use rangevote::experiment::{
    build_model, derive_seed, evaluate_surfaces, generate_candidates, load_inputs, outputs_from_records, run_experiment,
};
use rangevote::io::{read_candidates, vocabulary_from_records, CandidateRecord, DatasetRecord};
use rangevote::models::{AnyModel, SequenceModel};
use rangevote::oracle::{enumerate_distribution, EnumerateOptions};
use rangevote::seq::{Sequence, Vocabulary};
use rangevote::voting::{range_vote, Similarity, SimilarityKind, SimilaritySpec};
use rangevote::{Error, Result};

/// Range-voting decoding for sequence models
#[derive(Parser, Debug)]
#[command(name = "rangevote", version, about)]
struct Cli {
    /// Worker threads (default: one per CPU)
    #[arg(long, global = true, env = "RANGEVOTE_WORKERS")]
    workers: Option<usize>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Train an n-gram model, or save the configured model to a file
    Train(TrainArgs),
    /// Generate candidate sets with beam search or sampling
    Decode(DecodeArgs),
    /// Range-vote over candidate files
    Vote(VoteArgs),
    /// Score system outputs against a dataset
    Eval(EvalArgs),
    /// Exact MAP and voting winner by enumeration
    Oracle(OracleArgs),
    /// Run a full experiment grid from a config file
    Run(RunArgs),
}

#[derive(Args, Debug)]
struct TrainArgs {
    /// Experiment config; its [model] section supplies defaults
    #[arg(long)]
    config: Option<PathBuf>,
    /// Training text, one sentence per line
    #[arg(long)]
    corpus: Option<PathBuf>,
    #[arg(long)]
    order: Option<usize>,
    #[arg(long)]
    add_k: Option<f64>,
    #[arg(long)]
    lowercase: bool,
    /// Model file to write
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args, Debug)]
struct DecodeArgs {
    #[arg(long)]
    config: Option<PathBuf>,
    /// Model file (overrides [model])
    #[arg(long)]
    model: Option<PathBuf>,
    /// Dataset JSONL; without one a single unconditional input is decoded
    #[arg(long)]
    dataset: Option<PathBuf>,
    #[arg(long)]
    beam_size: Option<usize>,
    #[arg(long)]
    max_len: Option<usize>,
    /// logprob or length_normalized
    #[arg(long)]
    scoring: Option<ScoringMode>,
    #[arg(long)]
    diverse_gamma: Option<f64>,
    /// Drop hypotheses sharing at least this fraction of the source's unigrams
    #[arg(long)]
    filter_copies: Option<f64>,
    /// Draw this many samples instead of running beam search
    #[arg(long)]
    sample: Option<usize>,
    /// ancestral, top_k:K or nucleus:P
    #[arg(long)]
    strategy: Option<String>,
    #[arg(long)]
    seed: Option<u64>,
    /// Output JSONL (default: stdout)
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct SimArgs {
    /// prec, overl, bleu, smoothed_bleu, embed_cosine, or a full name like overl_2
    #[arg(long)]
    sim: Option<String>,
    /// n-gram order for prec and overl
    #[arg(long)]
    n: Option<usize>,
    /// Highest n-gram order for the BLEU kinds
    #[arg(long)]
    max_n: Option<usize>,
    /// Token vector table for embed_cosine
    #[arg(long)]
    vectors: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct VoteArgs {
    #[arg(long)]
    config: Option<PathBuf>,
    /// Candidates JSONL written by `decode`
    #[arg(long)]
    candidates: PathBuf,
    #[command(flatten)]
    sim: SimArgs,
    /// same, beam:K, sample:N or file:PATH
    #[arg(long)]
    voters: Option<String>,
    /// Model for beam and sample voters (and the vocabulary)
    #[arg(long)]
    model: Option<PathBuf>,
    #[arg(long)]
    voter_strategy: Option<String>,
    #[arg(long)]
    voter_max_len: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    /// Include the voter-by-candidate contribution matrix
    #[arg(long)]
    contributions: bool,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct EvalArgs {
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    dataset: Option<PathBuf>,
    /// System outputs as NAME=FILE or FILE (named after the file stem)
    #[arg(long = "system", required = true)]
    systems: Vec<String>,
    /// bleu, length, distinct, copies or all
    #[arg(long = "metric", value_delimiter = ',')]
    metrics: Vec<String>,
    #[arg(long)]
    max_n: Option<usize>,
    #[arg(long)]
    copy_threshold: Option<f64>,
    #[arg(long)]
    lowercase: bool,
    /// Two-tailed sign test between systems A and B
    #[arg(long = "sign-test", value_name = "A:B")]
    sign_tests: Vec<String>,
    /// Paired bootstrap resamples for each --sign-test pair
    #[arg(long)]
    paired_bootstrap: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    /// Report files (default: TSV on stdout)
    #[arg(long)]
    out_tsv: Option<PathBuf>,
    #[arg(long)]
    out_json: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct OracleArgs {
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    model: Option<PathBuf>,
    #[arg(long)]
    max_len: Option<usize>,
    #[arg(long)]
    floor: Option<f64>,
    #[arg(long)]
    budget: Option<usize>,
    #[command(flatten)]
    sim: SimArgs,
    /// Write the enumerated distribution as JSONL
    #[arg(long)]
    enumerate: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct RunArgs {
    #[arg(long)]
    config: PathBuf,
    #[arg(long)]
    out_dir: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 1 } else { 0 });
        }
    };
    match dispatch(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}

fn dispatch(cli: Cli) -> Result<()> {
    if cli.workers == Some(0) {
        return Err(Error::InvalidArgument("workers must be at least 1".into()));
    }
    match cli.command {
        Command::Train(a) => train(a),
        Command::Decode(a) => with_pool(cli.workers, || decode(a)),
        Command::Vote(a) => with_pool(cli.workers, || vote(a)),
        Command::Eval(a) => eval(a),
        Command::Oracle(a) => oracle(a),
        Command::Run(a) => run(a, cli.workers),
    }
}

fn with_pool<T: Send>(workers: Option<usize>, f: impl FnOnce() -> Result<T> + Send) -> Result<T> {
    let mut builder = rayon::ThreadPoolBuilder::new();
    if let Some(w) = workers {
        builder = builder.num_threads(w);
    }
    let pool = builder
        .build()
        .map_err(|e| Error::InvalidArgument(format!("cannot start worker pool: {e}")))?;
    pool.install(f)
}

fn load_config(path: Option<&Path>) -> Result<ExperimentConfig> {
    match path {
        Some(p) => ExperimentConfig::load(p),
        None => Ok(ExperimentConfig::empty()),
    }
}

/// Flag paths are relative to the working directory, config paths to the
/// config file; making flag paths absolute keeps both right.
fn absolute(p: &Path) -> PathBuf {
    std::env::current_dir().map(|d| d.join(p)).unwrap_or_else(|_| p.to_path_buf())
}

fn write_output(out: Option<&Path>, records: &[CandidateRecord]) -> Result<()> {
    match out {
        Some(p) => rangevote::io::write_jsonl(p, records),
        None => {
            let mut stdout = std::io::stdout().lock();
            for r in records {
                let line = serde_json::to_string(r).map_err(|e| Error::Parse {
                    what: "output record".into(),
                    message: e.to_string(),
                })?;
                writeln!(stdout, "{line}").map_err(|e| Error::Io {
                    path: "<stdout>".into(),
                    source: e,
                })?;
            }
            Ok(())
        }
    }
}

fn train(a: TrainArgs) -> Result<()> {
    let mut cfg = load_config(a.config.as_deref())?;
    if let Some(corpus) = &a.corpus {
        let (order, add_k, lowercase) = match &cfg.model {
            Some(ModelConfig::Train {
                order,
                add_k,
                lowercase,
                ..
            }) => (*order, *add_k, *lowercase),
            _ => (3, 0.1, false),
        };
        cfg.model = Some(ModelConfig::Train {
            corpus: absolute(corpus),
            order,
            add_k,
            lowercase,
        });
    }
    if let Some(ModelConfig::Train {
        order,
        add_k,
        lowercase,
        ..
    }) = cfg.model.as_mut()
    {
        if let Some(o) = a.order {
            *order = o;
        }
        if let Some(k) = a.add_k {
            *add_k = k;
        }
        *lowercase |= a.lowercase;
    } else if a.order.is_some() || a.add_k.is_some() {
        return Err(Error::InvalidArgument("--order and --add-k need a training corpus".into()));
    }
    if cfg.model.is_none() {
        return Err(Error::InvalidArgument("train needs --corpus or a config with [model]".into()));
    }
    let model = build_model(&cfg)?;
    model.save(&a.out)?;
    if let AnyModel::NGram(m) = &model {
        eprintln!("trained order-{} model, {} tokens", m.order(), m.vocab().num_regular());
    }
    Ok(())
}

fn model_config(cfg: &mut ExperimentConfig, model: Option<&Path>) {
    if let Some(p) = model {
        cfg.model = Some(ModelConfig::File { path: absolute(p) });
    }
}

fn decode(a: DecodeArgs) -> Result<()> {
    let mut cfg = load_config(a.config.as_deref())?;
    model_config(&mut cfg, a.model.as_deref());
    if let Some(d) = &a.dataset {
        cfg.dataset = Some(rangevote::config::DatasetConfig { path: absolute(d) });
    }
    let mut setting = cfg.decode.first().cloned().unwrap_or(DecodeConfig::Beam {
        name: None,
        beam_size: 10,
        max_len: 20,
        scoring: ScoringMode::Logprob,
        diverse_gamma: 0.0,
        filter_copies: None,
    });
    if let Some(count) = a.sample {
        let max_len = setting.max_len();
        let strategy = match &setting {
            DecodeConfig::Sample { strategy, .. } => strategy.clone(),
            _ => "ancestral".into(),
        };
        setting = DecodeConfig::Sample {
            name: None,
            count,
            strategy,
            max_len,
        };
    }
    match &mut setting {
        DecodeConfig::Beam {
            beam_size,
            max_len,
            scoring,
            diverse_gamma,
            filter_copies,
            ..
        } => {
            if a.strategy.is_some() {
                return Err(Error::InvalidArgument("--strategy applies to sampling only".into()));
            }
            set(beam_size, a.beam_size);
            set(max_len, a.max_len);
            set(scoring, a.scoring);
            set(diverse_gamma, a.diverse_gamma);
            if a.filter_copies.is_some() {
                *filter_copies = a.filter_copies;
            }
        }
        DecodeConfig::Sample {
            strategy, max_len, ..
        } => {
            if a.beam_size.is_some() || a.filter_copies.is_some() || a.diverse_gamma.is_some() || a.scoring.is_some() {
                return Err(Error::InvalidArgument("beam flags cannot be combined with --sample".into()));
            }
            set(strategy, a.strategy.clone());
            set(max_len, a.max_len);
        }
    }
    setting.validate()?;
    let model = build_model(&cfg)?;
    let vocab = model.vocab();
    let seed = a.seed.or(cfg.seed).unwrap_or(0);
    let inputs = load_inputs(&cfg)?;
    use rayon::prelude::*;
    let records: Vec<CandidateRecord> = inputs
        .par_iter()
        .enumerate()
        .map(|(i, r)| {
            let source = r.source.as_deref().map(|s| vocab.tokenize(s, model.lowercase()));
            let set = generate_candidates(&model, &setting, source.as_ref(), derive_seed(seed, &[0, 0, i as u64]))?;
            Ok(CandidateRecord::from_set(&r.id, r.source.as_deref(), &set, vocab))
        })
        .collect::<Result<_>>()?;
    write_output(a.out.as_deref(), &records)
}

fn set<T>(slot: &mut T, value: Option<T>) {
    if let Some(v) = value {
        *slot = v;
    }
}

/// Similarity from flags over an optional configured default. A bare kind
/// (`overl`) takes its order from `--n` or `--max-n`.
fn similarity_spec(args: &SimArgs, configured: Option<SimilaritySpec>) -> Result<Option<SimilaritySpec>> {
    let mut spec = match &args.sim {
        Some(s) => Some(match s.as_str() {
            "prec" => SimilaritySpec::prec(1),
            "overl" => SimilaritySpec::overl(1),
            other => other.parse()?,
        }),
        None => configured,
    };
    if let Some(spec) = spec.as_mut() {
        match spec.kind {
            SimilarityKind::Prec | SimilarityKind::Overl => set(&mut spec.n, args.n),
            SimilarityKind::Bleu | SimilarityKind::SmoothedBleu => set(&mut spec.max_n, args.max_n),
            SimilarityKind::EmbedCosine => {}
        }
        if let Some(v) = &args.vectors {
            spec.vectors = Some(absolute(v));
        }
        spec.validate()?;
    }
    Ok(spec)
}

fn vote(a: VoteArgs) -> Result<()> {
    let mut cfg = load_config(a.config.as_deref())?;
    model_config(&mut cfg, a.model.as_deref());
    let configured = cfg.select.iter().find(|s| matches!(s, SelectConfig::Vote { .. }));
    let (mut voters, mut voter_strategy, mut voter_max_len) = ("same".to_string(), "ancestral".to_string(), None);
    if let Some(SelectConfig::Vote {
        voters: v,
        voter_strategy: vs,
        voter_max_len: vm,
        ..
    }) = configured
    {
        voters = v.clone();
        voter_strategy = vs.clone();
        voter_max_len = *vm;
    }
    let configured_sim = match configured {
        Some(s) => s.similarity(&cfg.base_dir)?,
        None => None,
    };
    let spec = similarity_spec(&a.sim, configured_sim)?
        .ok_or_else(|| Error::InvalidArgument("vote needs --sim or a [[select]] vote entry".into()))?;
    set(&mut voters, a.voters.clone());
    set(&mut voter_strategy, a.voter_strategy.clone());
    if a.voter_max_len.is_some() {
        voter_max_len = a.voter_max_len;
    }
    let voter_spec: VoterSpec = voters.parse()?;
    let seed = a.seed.or(cfg.seed).unwrap_or(0);

    let candidates = read_candidates(&a.candidates)?;
    let voter_file = match &voter_spec {
        VoterSpec::File(p) => Some(read_candidates(p)?),
        _ => None,
    };
    let model = match (&voter_spec, &cfg.model) {
        (VoterSpec::Beam(_) | VoterSpec::Sample(_), None) => {
            return Err(Error::InvalidArgument("beam and sample voters need --model".into()));
        }
        (_, Some(_)) => Some(build_model(&cfg)?),
        _ => None,
    };
    let vocab: Vocabulary = match &model {
        Some(m) => m.vocab().clone(),
        None => vocabulary_from_records(candidates.iter().chain(voter_file.iter().flatten())),
    };
    let sim = Similarity::from_spec(&spec, &vocab)?;
    let by_id: std::collections::HashMap<&str, &CandidateRecord> = voter_file
        .iter()
        .flatten()
        .map(|r| (r.id.as_str(), r))
        .collect();
    use rayon::prelude::*;
    let records: Vec<CandidateRecord> = candidates
        .par_iter()
        .enumerate()
        .map(|(i, rec)| {
            let cands = rec.to_set(&vocab);
            let max_len = voter_max_len.unwrap_or_else(|| cands.iter().map(|c| c.seq.len()).max().unwrap_or(0).max(1) * 2);
            let voter_set: CandidateSet = match &voter_spec {
                VoterSpec::Same => cands.clone(),
                VoterSpec::File(p) => by_id
                    .get(rec.id.as_str())
                    .map(|r| r.to_set(&vocab))
                    .ok_or_else(|| Error::InvalidArgument(format!("{} has no record {:?}", p.display(), rec.id)))?,
                VoterSpec::Beam(k) | VoterSpec::Sample(k) => {
                    let m = model.as_ref().expect("checked above");
                    let source = rec.source.as_deref().map(|s| vocab.tokenize(s, m.lowercase()));
                    let context = source.as_ref().map(Sequence::ids);
                    if let VoterSpec::Beam(_) = voter_spec {
                        beam_search(m, context, &BeamParams::new(*k, max_len))?
                    } else {
                        sample_sequences(
                            m,
                            context,
                            *k,
                            voter_strategy.parse()?,
                            derive_seed(seed, &[1, 0, 0, i as u64]),
                            max_len,
                        )?
                    }
                }
            };
            let result = range_vote(&cands, &voter_set, &sim, a.contributions)?;
            Ok(CandidateRecord::from_vote(&rec.id, rec.source.as_deref(), &result, &vocab))
        })
        .collect::<Result<_>>()?;
    write_output(a.out.as_deref(), &records)
}

fn eval(a: EvalArgs) -> Result<()> {
    let cfg = load_config(a.config.as_deref())?;
    let dataset_path = match (&a.dataset, &cfg.dataset) {
        (Some(p), _) => Some(p.clone()),
        (None, Some(d)) => Some(cfg.resolve(&d.path)),
        _ => None,
    };
    let mut opts: EvalOptions = cfg.output.eval_options()?;
    if !a.metrics.is_empty() {
        opts.metrics = a.metrics.join(",").parse::<MetricSet>()?;
    }
    set(&mut opts.max_n, a.max_n);
    set(&mut opts.copy_threshold, a.copy_threshold);
    if opts.max_n == 0 || !(0.0..=1.0).contains(&opts.copy_threshold) {
        return Err(Error::InvalidArgument("need max_n >= 1 and copy_threshold in [0, 1]".into()));
    }

    let mut named: Vec<(String, Vec<CandidateRecord>)> = Vec::new();
    for s in &a.systems {
        let (name, path) = match s.split_once('=') {
            Some((n, p)) => (n.to_string(), PathBuf::from(p)),
            None => {
                let p = PathBuf::from(s);
                let n = p.file_stem().map(|x| x.to_string_lossy().into_owned()).unwrap_or_else(|| s.clone());
                (n, p)
            }
        };
        named.push((name, read_candidates(&path)?));
    }
    let dataset: Vec<DatasetRecord> = match &dataset_path {
        Some(p) => rangevote::io::read_dataset(p)?,
        None => named[0]
            .1
            .iter()
            .map(|r| DatasetRecord {
                id: r.id.clone(),
                source: r.source.clone(),
                references: Vec::new(),
            })
            .collect(),
    };
    let systems = named
        .iter()
        .map(|(n, recs)| Ok((n.clone(), outputs_from_records(recs, &dataset, n)?)))
        .collect::<Result<Vec<_>>>()?;
    let report = evaluate_surfaces(&systems, &dataset, &opts, a.lowercase)?;
    let tsv = report.to_tsv();
    if let Some(p) = &a.out_tsv {
        rangevote::io::write_text(p, &tsv)?;
    }
    if let Some(p) = &a.out_json {
        rangevote::io::write_text(p, &report.to_json())?;
    }
    let mut out = String::new();
    if a.out_tsv.is_none() {
        out.push_str(&tsv);
    }

    if !a.sign_tests.is_empty() {
        if dataset.iter().any(|d| d.references.is_empty()) {
            return Err(Error::InvalidArgument("significance tests need references for every input".into()));
        }
        let vocab = Vocabulary::from_texts(
            systems
                .iter()
                .flat_map(|(_, o)| o.iter().map(|t| t.join(" ")))
                .chain(dataset.iter().flat_map(|d| d.references.iter().cloned())),
            a.lowercase,
        );
        let refs: Vec<Vec<Sequence>> = dataset
            .iter()
            .map(|d| d.references.iter().map(|r| vocab.tokenize(r, a.lowercase)).collect())
            .collect();
        let lookup = |name: &str| -> Result<Vec<Sequence>> {
            systems
                .iter()
                .find(|(n, _)| n == name)
                .map(|(_, o)| o.iter().map(|t| vocab.encode(t)).collect())
                .ok_or_else(|| Error::InvalidArgument(format!("unknown system {name:?} in --sign-test")))
        };
        out.push_str("\ntest\tsystem_a\tsystem_b\twins_a\twins_b\tp_value\n");
        for pair in &a.sign_tests {
            let (na, nb) = pair
                .split_once(':')
                .ok_or_else(|| Error::InvalidArgument(format!("--sign-test expects A:B, got {pair:?}")))?;
            let (ha, hb) = (lookup(na)?, lookup(nb)?);
            let (wa, wb) = segment_wins(&ha, &hb, &refs, opts.max_n)?;
            let p = if wa + wb == 0 { 1.0 } else { sign_test(wa, wb)? };
            out.push_str(&format!("sign_test\t{na}\t{nb}\t{wa}\t{wb}\t{p:.6}\n"));
            if let Some(b) = a.paired_bootstrap {
                let seed = a.seed.or(cfg.seed).unwrap_or(0);
                let metric = BootstrapMetric::CorpusBleu { max_n: opts.max_n };
                let p = paired_bootstrap(&ha, &hb, &refs, metric, b, seed)?;
                out.push_str(&format!("paired_bootstrap\t{na}\t{nb}\tNA\tNA\t{p:.6}\n"));
            }
        }
    }
    print!("{out}");
    Ok(())
}

fn oracle(a: OracleArgs) -> Result<()> {
    let mut cfg = load_config(a.config.as_deref())?;
    model_config(&mut cfg, a.model.as_deref());
    let o = &cfg.oracle;
    let opts = EnumerateOptions::new(a.max_len.unwrap_or(o.max_len))
        .with_floor(a.floor.unwrap_or(o.floor))
        .with_budget(a.budget.unwrap_or(o.budget));
    let configured = cfg
        .select
        .iter()
        .find(|s| matches!(s, SelectConfig::ExactVote { .. } | SelectConfig::Vote { .. }))
        .map(|s| s.similarity(&cfg.base_dir))
        .transpose()?
        .flatten();
    let spec = similarity_spec(&a.sim, configured)?;
    let model = build_model(&cfg)?;
    let vocab = model.vocab();
    let dist = enumerate_distribution(&model, None, &opts)?;
    if let Some(p) = &a.enumerate {
        let file = std::fs::File::create(p).map_err(|e| Error::Io {
            path: p.clone(),
            source: e,
        })?;
        dist.write_jsonl(vocab, std::io::BufWriter::new(file)).map_err(|e| Error::Io {
            path: p.clone(),
            source: e,
        })?;
    }
    let map = dist.entries.first().ok_or(Error::Empty("enumerated support"))?;
    let mut out = format!(
        "support\t{}\ncovered_mass\t{:.9}\nmap\t{}\t{:.9}\n",
        dist.len(),
        dist.covered_mass(),
        vocab.detokenize(&map.seq),
        map.logprob.exp()
    );
    if let Some(spec) = spec {
        let sim = Similarity::from_spec(&spec, vocab)?;
        let vote = range_vote(&dist.entries, &dist.entries, &sim, false)?;
        let w = vote.winner();
        out.push_str(&format!("vote\t{}\t{:.9}\t{spec}\n", vocab.detokenize(&w.seq), w.score));
    }
    print!("{out}");
    Ok(())
}

fn run(a: RunArgs, workers: Option<usize>) -> Result<()> {
    let mut cfg = ExperimentConfig::load(&a.config)?;
    if let Some(d) = &a.out_dir {
        cfg.output.dir = absolute(d);
    }
    if a.seed.is_some() {
        cfg.seed = a.seed;
    }
    if workers.is_some() {
        cfg.workers = workers;
    }
    let summary = run_experiment(&cfg)?;
    print!("{}", summary.report.to_tsv());
    eprintln!("wrote {} files to {}", summary.files.len(), summary.out_dir.display());
    Ok(())
}
