//! `srcattr`: attribution, evaluation, corpus statistics and probe datasets
//! from the command line.
//!
//! Exit status is 0 on success, 1 on configuration or validation errors and 2
//! when the run completed but some records were skipped.

mod manifest;

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Duration;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::{Deserialize, Serialize};

use srcattr::eval::{self, ChannelGrouping, EvalOptions, EvalReport};
use srcattr::io;
use srcattr::neural::{
    self, compose_pipeline, EndpointClient, EndpointConfig, PipelineConfig, PipelineMode, Prediction, Provenance,
};
use srcattr::parallel::{self, Execution};
use srcattr::probes::{
    self, AblationConfig, Difficulty, NewsEditsConfig, NewsEditsInput, ProbeOutput, SecondRule, VersionPair,
};
use srcattr::rules::{self, Rule, RuleBackend, RuleConfig};
use srcattr::{Document, DocumentAttribution, Error, Lexicons};

#[derive(Parser, Serialize)]
#[command(name = "srcattr", version, about = "Sentence-level source attribution for news articles")]
struct Cli {
    /// Worker threads for document-level parallelism (default: all cores).
    #[arg(long, global = true)]
    jobs: Option<usize>,

    /// Process documents one at a time on the main thread.
    #[arg(long, global = true)]
    sequential: bool,

    /// Raise log verbosity (-v info, -vv debug).
    #[arg(short, long, action = clap::ArgAction::Count, global = true)]
    #[serde(skip)]
    verbose: u8,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Serialize)]
#[serde(rename_all = "kebab-case")]
enum Command {
    /// Attribute sentences to sources with a rule backend or model predictions.
    Attribute(AttributeArgs),
    /// Score attribution files against gold labels.
    Evaluate(EvaluateArgs),
    /// Corpus-level sourcing statistics.
    Stats(StatsArgs),
    /// Build ablation or NewsEdits probe datasets.
    BuildProbes(ProbeArgs),
    /// Compare lexical features across probe classes.
    Audit(AuditArgs),
    /// Check that a completion endpoint answers.
    ServeCheck(ServeArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
enum Backend {
    R1,
    R2,
    Patterns,
    Pipeline,
    #[value(name = "pipeline+nones", alias = "pipeline,+nones")]
    #[serde(rename = "pipeline+nones")]
    PipelinePlusNones,
}

#[derive(Args, Serialize)]
struct AttributeArgs {
    #[arg(long, value_enum)]
    backend: Backend,
    /// Annotated documents (JSONL).
    #[arg(long = "in")]
    input: PathBuf,
    /// Attribution output (JSONL).
    #[arg(long)]
    out: PathBuf,
    /// Directory with speaking_verbs.txt, signifiers.txt and patterns.txt.
    #[arg(long)]
    lexicons: Option<PathBuf>,
    /// R2: also accept passive subjects (nsubj:pass).
    #[arg(long)]
    include_passive_subjects: bool,
    /// Per-attribution rule evidence (JSONL).
    #[arg(long)]
    evidence: Option<PathBuf>,
    /// Pipeline: detector and retrieval predictions (JSONL).
    #[arg(long)]
    predictions: Option<PathBuf>,
    /// Pipeline: detection threshold.
    #[arg(long, default_value_t = 0.5)]
    threshold: f64,
    /// Pipeline: completion endpoint used for detected sentences without a retrieved source.
    #[arg(long)]
    endpoint: Option<String>,
    /// Environment variable holding the endpoint bearer token.
    #[arg(long, default_value = "SRCATTR_ENDPOINT_TOKEN")]
    token_env: String,
    /// Concurrent endpoint requests.
    #[arg(long, default_value_t = 4)]
    endpoint_parallelism: usize,
    /// Per-request timeout in seconds.
    #[arg(long, default_value_t = 30)]
    timeout: u64,
    #[arg(long, default_value_t = 3)]
    retries: u32,
    /// Demonstrations for the retrieval prompt: JSONL of {"sentence", "source"}.
    #[arg(long)]
    prefix_examples: Option<PathBuf>,
    /// Truncate prompts to this many characters.
    #[arg(long)]
    max_prompt_chars: Option<usize>,
    /// Inputs were coreference-resolved upstream (recorded in the manifest).
    #[arg(long)]
    coref: bool,
}

#[derive(Debug, Clone, Copy, ValueEnum, Serialize)]
enum GroupingView {
    Summary,
    Full,
}

#[derive(Args, Serialize)]
struct EvaluateArgs {
    /// Gold-annotated documents (JSONL).
    #[arg(long)]
    gold: PathBuf,
    /// Attribution files to score; repeat for several systems.
    #[arg(long = "pred", required = true)]
    preds: Vec<PathBuf>,
    /// Display names, one per --pred (default: file stem).
    #[arg(long = "system")]
    systems: Vec<String>,
    #[arg(long, value_enum, default_value = "summary")]
    grouping: GroupingView,
    /// Channel grouping file overriding the shipped one.
    #[arg(long)]
    grouping_file: Option<PathBuf>,
    /// Leave passive-voice sentences out of retrieval accuracy.
    #[arg(long)]
    strict_passive: bool,
    /// JSON report.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args, Serialize)]
struct StatsArgs {
    #[arg(long = "in")]
    input: PathBuf,
    /// Silver attributions; gold labels are used when omitted.
    #[arg(long)]
    attributions: Option<PathBuf>,
    /// Corpus summary (JSON); printed when omitted.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Per-document statistics (JSONL).
    #[arg(long)]
    per_doc: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
enum ProbeKind {
    Ablation,
    Newsedits,
}

#[derive(Debug, Clone, Copy, ValueEnum, Serialize)]
enum DifficultyArg {
    Top,
    Second,
    Any,
}

#[derive(Debug, Clone, Copy, ValueEnum, Serialize)]
enum SecondRuleArg {
    Top3,
    Share10,
}

#[derive(Args, Serialize)]
struct ProbeArgs {
    #[arg(long, value_enum)]
    probe: ProbeKind,
    #[arg(long = "in")]
    input: PathBuf,
    /// Silver attributions; gold labels are used when omitted.
    #[arg(long)]
    attributions: Option<PathBuf>,
    /// Version pairs (JSONL), required for newsedits.
    #[arg(long)]
    pairs: Option<PathBuf>,
    #[arg(long)]
    out: PathBuf,
    #[arg(long, value_enum, default_value = "top")]
    difficulty: DifficultyArg,
    #[arg(long, value_enum, default_value = "top3")]
    second_rule: SecondRuleArg,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Negatives are the unablated documents, flagged evaluation-only.
    #[arg(long)]
    control: bool,
    /// Also emit the text with SOURCE annotations.
    #[arg(long)]
    with_sa: bool,
    /// NewsEdits: keep every candidate instead of balancing strata.
    #[arg(long)]
    unbalanced: bool,
    #[arg(long, default_value_t = 10)]
    length_bins: usize,
    #[arg(long, default_value_t = 3)]
    edit_bins: usize,
    #[arg(long)]
    lexicons: Option<PathBuf>,
    /// Skipped documents with reasons (JSONL).
    #[arg(long)]
    skips: Option<PathBuf>,
}

#[derive(Args, Serialize)]
struct AuditArgs {
    /// Probe examples (JSONL).
    #[arg(long = "in")]
    input: PathBuf,
    /// JSON report.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args, Serialize)]
struct ServeArgs {
    #[arg(long)]
    endpoint: String,
    #[arg(long, default_value = "SRCATTR_ENDPOINT_TOKEN")]
    token_env: String,
    #[arg(long, default_value_t = 10)]
    timeout: u64,
    #[arg(long, default_value_t = 0)]
    retries: u32,
}

/// Records skipped during a run; any makes the exit status 2.
#[derive(Default)]
struct Skipped {
    count: usize,
}

impl Skipped {
    fn note(&mut self, what: impl std::fmt::Display) {
        eprintln!("skipped: {what}");
        self.count += 1;
    }
}

struct Ctx {
    exec: Execution,
    config: serde_json::Value,
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    let level = match cli.verbose {
        0 => "warn",
        1 => "info",
        _ => "debug",
    };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level))
        .format_timestamp(None)
        .init();
    match run(&cli) {
        Ok(skipped) if skipped.count > 0 => {
            eprintln!("completed with {} skipped record(s)", skipped.count);
            ExitCode::from(2)
        }
        Ok(_) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(1)
        }
    }
}

fn run(cli: &Cli) -> Result<Skipped> {
    if let Some(n) = cli.jobs {
        if n == 0 {
            bail!("--jobs must be at least 1");
        }
        configure_pool(n)?;
    }
    let exec = if cli.sequential || cli.jobs == Some(1) {
        Execution::Sequential
    } else {
        Execution::Parallel
    };
    let ctx = Ctx {
        exec,
        config: serde_json::to_value(cli)?,
    };
    match &cli.command {
        Command::Attribute(a) => attribute(&ctx, a),
        Command::Evaluate(a) => evaluate(&ctx, a),
        Command::Stats(a) => stats(&ctx, a),
        Command::BuildProbes(a) => build_probes(&ctx, a),
        Command::Audit(a) => audit(&ctx, a),
        Command::ServeCheck(a) => serve_check(a),
    }
}

#[cfg(feature = "parallel")]
fn configure_pool(n: usize) -> Result<()> {
    rayon::ThreadPoolBuilder::new()
        .num_threads(n)
        .build_global()
        .context("cannot configure the worker pool")
}

#[cfg(not(feature = "parallel"))]
fn configure_pool(_n: usize) -> Result<()> {
    Ok(())
}

fn load_lexicons(dir: Option<&Path>) -> Result<Lexicons> {
    match dir {
        Some(d) => Lexicons::load_dir(d).with_context(|| format!("loading lexicons from {}", d.display())),
        None => Ok(Lexicons::shipped()),
    }
}

fn lexicon_inputs(dir: Option<&Path>) -> Vec<PathBuf> {
    let Some(d) = dir else { return Vec::new() };
    ["speaking_verbs.txt", "signifiers.txt", "patterns.txt"]
        .iter()
        .map(|f| d.join(f))
        .filter(|p| p.exists())
        .collect()
}

/// Collects a record stream, skipping bad records and stopping on I/O errors.
fn collect<T>(items: impl Iterator<Item = srcattr::Result<T>>, skipped: &mut Skipped) -> Result<Vec<T>> {
    let mut out = Vec::new();
    for item in items {
        match item {
            Ok(x) => out.push(x),
            Err(e @ Error::Record { .. }) => skipped.note(e),
            Err(e) => return Err(e.into()),
        }
    }
    Ok(out)
}

fn read_docs(path: &Path, skipped: &mut Skipped) -> Result<Vec<Document>> {
    collect(io::read_corpus(path)?, skipped).with_context(|| format!("reading {}", path.display()))
}

type AttrIndex = BTreeMap<(String, u32), DocumentAttribution>;

/// Reads attributions keyed by document version, dropping those that do not
/// fit their document.
fn read_attr_index(path: &Path, docs: &[Document], skipped: &mut Skipped) -> Result<AttrIndex> {
    let by_key: BTreeMap<(&str, u32), &Document> = docs.iter().map(|d| ((d.doc_id.as_str(), d.version_id), d)).collect();
    let mut out = AttrIndex::new();
    for a in collect(io::read_attributions(path)?, skipped)? {
        if let Some(d) = by_key.get(&(a.doc_id.as_str(), a.version_id)) {
            if let Err(e) = a.validate(d) {
                skipped.note(format!("{}: {e}", path.display()));
                continue;
            }
        }
        out.insert((a.doc_id.clone(), a.version_id), a);
    }
    Ok(out)
}

/// Silver attributions from a file, or the gold labels of the documents.
fn attributions_for(path: Option<&Path>, docs: &[Document], skipped: &mut Skipped) -> Result<AttrIndex> {
    match path {
        Some(p) => read_attr_index(p, docs, skipped),
        None => Ok(docs
            .iter()
            .map(|d| ((d.doc_id.clone(), d.version_id), DocumentAttribution::from_gold(d)))
            .collect()),
    }
}

/// Pairs every document with its attribution; documents without one are skipped.
fn paired<'a>(docs: &'a [Document], attrs: &'a AttrIndex, skipped: &mut Skipped) -> Vec<(&'a Document, &'a DocumentAttribution)> {
    docs.iter()
        .filter_map(|d| match attrs.get(&(d.doc_id.clone(), d.version_id)) {
            Some(a) => Some((d, a)),
            None => {
                skipped.note(format!("{}@{}: no attribution record", d.doc_id, d.version_id));
                None
            }
        })
        .collect()
}

#[derive(Serialize)]
struct EvidenceRecord<'a> {
    doc_id: &'a str,
    version_id: u32,
    sentence: usize,
    source_id: usize,
    rule: &'static str,
    #[serde(skip_serializing_if = "Option::is_none")]
    pattern_id: Option<usize>,
    trigger_token: usize,
}

#[derive(Deserialize)]
struct PrefixExample {
    sentence: String,
    source: String,
}

fn attribute(ctx: &Ctx, a: &AttributeArgs) -> Result<Skipped> {
    let mut skipped = Skipped::default();
    let lexicons = load_lexicons(a.lexicons.as_deref())?;
    let docs = read_docs(&a.input, &mut skipped)?;
    let mut inputs = vec![a.input.clone()];
    inputs.extend(lexicon_inputs(a.lexicons.as_deref()));
    let mut outputs = vec![a.out.clone()];

    let attributions: Vec<DocumentAttribution> = match a.backend {
        Backend::R1 | Backend::R2 | Backend::Patterns => {
            let backend = match a.backend {
                Backend::R1 => RuleBackend::R1,
                Backend::R2 => RuleBackend::R2,
                _ => RuleBackend::Patterns,
            };
            let cfg = RuleConfig {
                include_passive_subjects: a.include_passive_subjects,
            };
            let results = parallel::map(&docs, ctx.exec, |d| backend.attribute(d, &lexicons, cfg));
            let mut attrs = Vec::new();
            let mut evidence = Vec::new();
            for (d, r) in docs.iter().zip(results) {
                match r {
                    Ok(out) => {
                        evidence.extend(out.evidence.iter().map(|e| {
                            let (rule, pattern_id) = match e.rule {
                                Rule::R1 => ("R1", None),
                                Rule::R2 => ("R2", None),
                                Rule::Pattern(p) => ("PATTERN", Some(p)),
                            };
                            EvidenceRecord {
                                doc_id: &d.doc_id,
                                version_id: d.version_id,
                                sentence: e.sentence,
                                source_id: e.source_id,
                                rule,
                                pattern_id,
                                trigger_token: e.trigger_token,
                            }
                        }));
                        attrs.push(out.attribution);
                    }
                    Err(e) => skipped.note(format!("{}@{}: {e}", d.doc_id, d.version_id)),
                }
            }
            if let Some(path) = &a.evidence {
                io::write_jsonl(path, &evidence)?;
                outputs.push(path.clone());
            }
            attrs
        }
        Backend::Pipeline | Backend::PipelinePlusNones => {
            let Some(pred_path) = &a.predictions else {
                bail!("--backend {} needs --predictions", if a.backend == Backend::Pipeline { "pipeline" } else { "pipeline+nones" });
            };
            if a.evidence.is_some() {
                bail!("--evidence applies to rule backends only");
            }
            inputs.push(pred_path.clone());
            let mut cfg = PipelineConfig {
                detection_threshold: a.threshold,
                mode: if a.backend == Backend::Pipeline {
                    PipelineMode::Pipeline
                } else {
                    PipelineMode::PipelinePlusNones
                },
                coref_variant: a.coref,
                endpoint: a.endpoint.as_ref().map(|url| EndpointConfig {
                    timeout: Duration::from_secs(a.timeout),
                    retries: a.retries,
                    parallelism: a.endpoint_parallelism,
                    ..EndpointConfig::new(url.clone(), a.token_env.clone())
                }),
                prefix_examples: Vec::new(),
                max_prompt_chars: a.max_prompt_chars,
            };
            if let Some(p) = &a.prefix_examples {
                let examples = collect(io::JsonlReader::<PrefixExample>::open(p)?.map(|r| r.map(|(_, x)| x)), &mut skipped)?;
                cfg.prefix_examples = examples.into_iter().map(|e| (e.sentence, e.source)).collect();
                inputs.push(p.clone());
            }
            cfg.validate()?;
            let mut preds: BTreeMap<String, Vec<Prediction>> = BTreeMap::new();
            for p in collect(io::read_predictions(pred_path)?, &mut skipped)? {
                preds.entry(p.doc_id.clone()).or_default().push(p);
            }
            let client = cfg.endpoint.clone().map(EndpointClient::new).transpose()?;
            let mut attrs = Vec::new();
            for d in &docs {
                let mut doc_preds = preds.get(&d.doc_id).cloned().unwrap_or_default();
                let provenance = match &client {
                    Some(c) => {
                        fill_from_endpoint(d, &mut doc_preds, &cfg, c, &mut skipped)?;
                        Provenance::Endpoint
                    }
                    None => Provenance::File,
                };
                let sources = rules::canonicalize_entities(d, &lexicons.signifiers);
                let out = compose_pipeline(d, &sources, &doc_preds, provenance, &cfg);
                for e in &out.errors {
                    skipped.note(format!("{}@{} sentence {}: {}", d.doc_id, d.version_id, e.sentence, e.message));
                }
                attrs.push(out.attribution);
            }
            attrs
        }
    };
    let n = io::write_attributions(&a.out, &attributions)?;
    log::info!("wrote {n} attribution records to {}", a.out.display());
    manifest::write("attribute", ctx.config.clone(), &inputs, &outputs, None)?;
    Ok(skipped)
}

/// Asks the endpoint for a source name wherever the detector fired and the
/// prediction file has no retrieval.
fn fill_from_endpoint(
    doc: &Document,
    preds: &mut Vec<Prediction>,
    cfg: &PipelineConfig,
    client: &EndpointClient,
    skipped: &mut Skipped,
) -> Result<()> {
    let mut wanted = Vec::new();
    for p in preds.iter().filter(|p| p.retrieved_source.is_none()) {
        if p.detector_score.is_some_and(|s| s >= cfg.detection_threshold)
            && p.sentence_index < doc.len()
            && !preds.iter().any(|q| q.sentence_index == p.sentence_index && q.retrieved_source.is_some())
        {
            wanted.push(p.sentence_index);
        }
    }
    wanted.sort_unstable();
    wanted.dedup();
    let prompts = wanted
        .iter()
        .map(|&i| neural::build_prompt(doc, i, cfg).map(|(p, _)| p))
        .collect::<srcattr::Result<Vec<_>>>()?;
    for (i, answer) in wanted.into_iter().zip(client.query(&prompts)) {
        match answer {
            Ok(name) => preds.push(Prediction {
                doc_id: doc.doc_id.clone(),
                sentence_index: i,
                detector_score: None,
                retrieved_source: Some(name.trim().to_owned()),
            }),
            Err(e) => skipped.note(format!("{}@{} sentence {i}: {e}", doc.doc_id, doc.version_id)),
        }
    }
    Ok(())
}

#[derive(Serialize)]
struct EvaluationOutput<'a> {
    reports: &'a [EvalReport],
    table: &'a eval::Table,
}

fn evaluate(ctx: &Ctx, a: &EvaluateArgs) -> Result<Skipped> {
    let mut skipped = Skipped::default();
    if !a.systems.is_empty() && a.systems.len() != a.preds.len() {
        bail!("{} --system names given for {} --pred files", a.systems.len(), a.preds.len());
    }
    let view = match a.grouping {
        GroupingView::Summary => "summary",
        GroupingView::Full => "full",
    };
    let grouping = match &a.grouping_file {
        Some(p) => ChannelGrouping::load(p, view)?,
        None => ChannelGrouping::shipped(view)?,
    };
    let docs = read_docs(&a.gold, &mut skipped)?;
    if !docs.iter().any(|d| d.has_gold()) {
        bail!("{} carries no gold labels", a.gold.display());
    }
    let opts = EvalOptions {
        strict_passive: a.strict_passive,
    };
    let mut reports = Vec::new();
    let mut inputs = vec![a.gold.clone()];
    inputs.extend(a.grouping_file.clone());
    for (k, path) in a.preds.iter().enumerate() {
        let name = a.systems.get(k).cloned().unwrap_or_else(|| {
            path.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_else(|| format!("system{k}"))
        });
        let preds = read_attr_index(path, &docs, &mut skipped)?;
        let report = eval::evaluate(&name, &docs, &preds, &grouping, opts, ctx.exec)?;
        if report.missing_predictions > 0 {
            log::warn!("{name}: {} gold documents have no attribution record", report.missing_predictions);
        }
        reports.push(report);
        inputs.push(path.clone());
    }
    let table = eval::tabulate(&reports);
    print!("{}", table.to_text());
    if let Some(out) = &a.out {
        let body = io::to_json_pretty(&EvaluationOutput {
            reports: &reports,
            table: &table,
        })? + "\n";
        io::write_text(out, &body)?;
        manifest::write("evaluate", ctx.config.clone(), &inputs, std::slice::from_ref(out), None)?;
    }
    Ok(skipped)
}

fn stats(ctx: &Ctx, a: &StatsArgs) -> Result<Skipped> {
    let mut skipped = Skipped::default();
    let docs = read_docs(&a.input, &mut skipped)?;
    let attrs = attributions_for(a.attributions.as_deref(), &docs, &mut skipped)?;
    let pairs = paired(&docs, &attrs, &mut skipped);
    let (per_doc, summary) = srcattr::analytics::corpus_stats(&pairs, ctx.exec)?;
    let mut inputs = vec![a.input.clone()];
    inputs.extend(a.attributions.clone());
    let mut outputs = Vec::new();
    let body = io::to_json_pretty(&summary)? + "\n";
    match &a.out {
        Some(p) => {
            io::write_text(p, &body)?;
            outputs.push(p.clone());
        }
        None => print!("{body}"),
    }
    if let Some(p) = &a.per_doc {
        io::write_jsonl(p, &per_doc)?;
        outputs.push(p.clone());
    }
    if !outputs.is_empty() {
        manifest::write("stats", ctx.config.clone(), &inputs, &outputs, None)?;
    }
    Ok(skipped)
}

fn build_probes(ctx: &Ctx, a: &ProbeArgs) -> Result<Skipped> {
    let mut skipped = Skipped::default();
    let lexicons = load_lexicons(a.lexicons.as_deref())?;
    let docs = read_docs(&a.input, &mut skipped)?;
    let attrs = attributions_for(a.attributions.as_deref(), &docs, &mut skipped)?;
    let mut inputs = vec![a.input.clone()];
    inputs.extend(a.attributions.clone());
    inputs.extend(lexicon_inputs(a.lexicons.as_deref()));

    let output: ProbeOutput = match a.probe {
        ProbeKind::Ablation => {
            let cfg = AblationConfig {
                difficulty: match a.difficulty {
                    DifficultyArg::Top => Difficulty::Top,
                    DifficultyArg::Second => Difficulty::Second,
                    DifficultyArg::Any => Difficulty::Any,
                },
                second_rule: match a.second_rule {
                    SecondRuleArg::Top3 => SecondRule::Top3,
                    SecondRuleArg::Share10 => SecondRule::Share10,
                },
                seed: a.seed,
                control: a.control,
                with_sa: a.with_sa,
            };
            let pairs = paired(&docs, &attrs, &mut skipped);
            probes::build_ablation_dataset(&pairs, &lexicons, &cfg, ctx.exec)
        }
        ProbeKind::Newsedits => {
            let Some(pairs_path) = &a.pairs else {
                bail!("--probe newsedits needs --pairs");
            };
            inputs.push(pairs_path.clone());
            let version_pairs: Vec<VersionPair> = collect(io::read_version_pairs(pairs_path)?, &mut skipped)?;
            let by_key: BTreeMap<(&str, u32), &Document> =
                docs.iter().map(|d| ((d.doc_id.as_str(), d.version_id), d)).collect();
            let mut ready = Vec::new();
            for p in &version_pairs {
                let doc_t = by_key.get(&(p.doc_id.as_str(), p.version_t));
                let attr_t = attrs.get(&(p.doc_id.clone(), p.version_t));
                let attr_t1 = attrs.get(&(p.doc_id.clone(), p.version_t_plus_1));
                match (doc_t, attr_t, attr_t1) {
                    (Some(d), Some(at), Some(at1)) => ready.push(NewsEditsInput {
                        pair: p,
                        doc_t: d,
                        attr_t: at,
                        attr_t1: at1,
                    }),
                    _ => skipped.note(format!(
                        "pair {}@{}->{}: missing document or attributions",
                        p.doc_id, p.version_t, p.version_t_plus_1
                    )),
                }
            }
            let cfg = NewsEditsConfig {
                seed: a.seed,
                length_bins: a.length_bins,
                edit_bins: a.edit_bins,
                with_sa: a.with_sa,
                unbalanced: a.unbalanced,
            };
            probes::build_newsedits_dataset(&ready, &lexicons, &cfg, ctx.exec)
        }
    };
    for w in &output.warnings {
        log::warn!("{w}");
    }
    if !output.skips.is_empty() {
        eprintln!("{} document(s) yielded no probe pair", output.skips.len());
    }
    let n = io::write_probes(&a.out, &output.examples)?;
    log::info!("wrote {n} probe examples to {}", a.out.display());
    let mut outputs = vec![a.out.clone()];
    if let Some(p) = &a.skips {
        io::write_jsonl(p, &output.skips)?;
        outputs.push(p.clone());
    }
    manifest::write("build-probes", ctx.config.clone(), &inputs, &outputs, Some(a.seed))?;
    Ok(skipped)
}

fn audit(ctx: &Ctx, a: &AuditArgs) -> Result<Skipped> {
    let mut skipped = Skipped::default();
    let examples = collect(io::read_probes(&a.input)?, &mut skipped)?;
    let report = probes::audit_confounds(&examples);
    println!(
        "{:<16} {:>6} {:>6} {:>12} {:>12} {:>10} {:>10}",
        "feature", "n(y=0)", "n(y=1)", "mean(y=0)", "mean(y=1)", "t", "p"
    );
    for f in &report.features {
        let (t, p) = match f.test {
            Some(w) => (format!("{:.3}", w.t), format!("{:.4}", w.p)),
            None => ("-".into(), "-".into()),
        };
        println!(
            "{:<16} {:>6} {:>6} {:>12.3} {:>12.3} {:>10} {:>10}{}",
            f.feature,
            f.n[0],
            f.n[1],
            f.mean[0],
            f.mean[1],
            t,
            p,
            if f.significant { "  *" } else { "" }
        );
    }
    if report.flagged.is_empty() {
        println!("no feature differs between classes at alpha={}", report.alpha);
    } else {
        println!("differs at alpha={}: {}", report.alpha, report.flagged.join(", "));
    }
    if let Some(out) = &a.out {
        io::write_text(out, &(io::to_json_pretty(&report)? + "\n"))?;
        manifest::write("audit", ctx.config.clone(), std::slice::from_ref(&a.input), std::slice::from_ref(out), None)?;
    }
    Ok(skipped)
}

fn serve_check(a: &ServeArgs) -> Result<Skipped> {
    let cfg = EndpointConfig {
        timeout: Duration::from_secs(a.timeout),
        retries: a.retries,
        ..EndpointConfig::new(a.endpoint.clone(), a.token_env.clone())
    };
    let client = EndpointClient::new(cfg)?;
    client.health_check().with_context(|| format!("endpoint {} failed the health check", a.endpoint))?;
    println!("ok: {}", a.endpoint);
    Ok(Skipped::default())
}
