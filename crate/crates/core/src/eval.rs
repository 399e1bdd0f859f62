//! Scoring attributions against gold labels.
//!
//! Three measures, each overall and per channel group:
//!
//! * detection: binary P/R/F1 on the sourced class. A group's positives are
//!   its gold-sourced sentences; its negatives are all gold-unsourced ones.
//! * retrieval accuracy over gold-sourced sentences: correct when a predicted
//!   source resolves to one of the sentence's gold sources.
//! * end-to-end accuracy over all sentences.
//!
//! The overall column pools confusion counts and accuracy tallies (micro).

use std::collections::{BTreeMap, BTreeSet};
use std::fmt::Write as _;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{Document, DocumentAttribution, GoldLabel, InformationChannel, Sentence, Source, PASSIVE_MARKER};
use crate::neural::{is_null_answer, resolve_retrieved_name, Resolution};
use crate::parallel::{self, Execution};

const SHIPPED_GROUPS: &str = include_str!("../data/channel_groups.json");

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ChannelGroup {
    pub name: String,
    pub channels: BTreeSet<InformationChannel>,
}

/// A many-to-one mapping from channels onto report columns.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ChannelGrouping {
    #[serde(default)]
    pub name: String,
    /// Split coarse `QUOTE` labels into direct and indirect by quote marks.
    pub refine_quote: bool,
    /// Column for channels no group lists.
    pub fallback: String,
    pub groups: Vec<ChannelGroup>,
}

#[derive(Deserialize)]
struct GroupingFile {
    views: BTreeMap<String, ChannelGrouping>,
}

impl ChannelGrouping {
    /// Reads one named view from a grouping file.
    pub fn from_json(raw: &str, view: &str) -> Result<Self> {
        let file: GroupingFile = serde_json::from_str(raw)?;
        let mut g = file
            .views
            .get(view)
            .cloned()
            .ok_or_else(|| Error::Config(format!("grouping view {view:?} not found")))?;
        g.name = view.to_owned();
        g.check()?;
        Ok(g)
    }

    pub fn load(path: &Path, view: &str) -> Result<Self> {
        let raw = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_json(&raw, view)
    }

    pub fn shipped(view: &str) -> Result<Self> {
        Self::from_json(SHIPPED_GROUPS, view)
    }

    /// The six sourced-channel columns of the attribution results table.
    pub fn summary() -> Self {
        Self::shipped("summary").expect("shipped grouping")
    }

    pub fn full() -> Self {
        Self::shipped("full").expect("shipped grouping")
    }

    fn check(&self) -> Result<()> {
        let mut seen = BTreeSet::new();
        for g in &self.groups {
            for c in &g.channels {
                if !seen.insert(*c) {
                    return Err(Error::Config(format!("channel {c} appears in two groups")));
                }
            }
        }
        if !self.groups.iter().any(|g| g.name == self.fallback) {
            return Err(Error::Config(format!("fallback group {:?} is not a declared group", self.fallback)));
        }
        Ok(())
    }

    pub fn columns(&self) -> Vec<&str> {
        self.groups.iter().map(|g| g.name.as_str()).collect()
    }

    /// Column of a gold-sourced sentence labelled `channel`.
    pub fn group_of(&self, channel: InformationChannel, sentence: &Sentence) -> &str {
        let channel = match channel {
            InformationChannel::Quote if self.refine_quote => {
                if sentence.has_quoted_span() {
                    InformationChannel::DirectQuote
                } else {
                    InformationChannel::IndirectQuote
                }
            }
            c => c,
        };
        self.groups
            .iter()
            .find(|g| g.channels.contains(&channel))
            .map(|g| g.name.as_str())
            .unwrap_or(&self.fallback)
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Confusion {
    pub tp: u64,
    pub fp: u64,
    pub fn_: u64,
    pub tn: u64,
}

impl Confusion {
    pub fn add(&mut self, pred: bool, gold: bool) {
        match (pred, gold) {
            (true, true) => self.tp += 1,
            (true, false) => self.fp += 1,
            (false, true) => self.fn_ += 1,
            (false, false) => self.tn += 1,
        }
    }

    pub fn merge(&mut self, other: &Confusion) {
        self.tp += other.tp;
        self.fp += other.fp;
        self.fn_ += other.fn_;
        self.tn += other.tn;
    }

    pub fn positives(&self) -> u64 {
        self.tp + self.fn_
    }

    pub fn scores(&self) -> Prf {
        let ratio = |a: u64, b: u64| if b == 0 { 0.0 } else { a as f64 / b as f64 };
        let precision = ratio(self.tp, self.tp + self.fp);
        let recall = ratio(self.tp, self.tp + self.fn_);
        let f1 = if precision + recall == 0.0 {
            0.0
        } else {
            2.0 * precision * recall / (precision + recall)
        };
        Prf {
            precision,
            recall,
            f1,
            support: self.positives(),
            degenerate: self.positives() == 0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Prf {
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    /// Gold positives.
    pub support: u64,
    /// No gold positives: F1 is reported as 0.
    pub degenerate: bool,
}

/// Binary detection scores. With `positive_filter`, gold positives outside the
/// filter are excluded; gold negatives always count.
pub fn detection_f1(pred: &[bool], gold: &[bool], positive_filter: Option<&[bool]>) -> Result<Prf> {
    if pred.len() != gold.len() || positive_filter.is_some_and(|f| f.len() != gold.len()) {
        return Err(Error::Structure(format!(
            "detection vectors differ in length: pred {}, gold {}",
            pred.len(),
            gold.len()
        )));
    }
    let mut c = Confusion::default();
    for i in 0..gold.len() {
        if gold[i] && positive_filter.is_some_and(|f| !f[i]) {
            continue;
        }
        c.add(pred[i], gold[i]);
    }
    Ok(c.scores())
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Tally {
    pub correct: u64,
    pub total: u64,
}

impl Tally {
    pub fn add(&mut self, ok: bool) {
        self.total += 1;
        self.correct += ok as u64;
    }

    pub fn merge(&mut self, other: &Tally) {
        self.correct += other.correct;
        self.total += other.total;
    }

    /// `None` when there is nothing to score.
    pub fn accuracy(&self) -> Option<f64> {
        (self.total > 0).then(|| self.correct as f64 / self.total as f64)
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct EvalOptions {
    /// Leave gold passive-voice sentences out of retrieval cells.
    pub strict_passive: bool,
}

fn gold_sources(gold: &GoldLabel) -> Vec<Source> {
    gold.source_names
        .iter()
        .filter(|n| !n.trim().eq_ignore_ascii_case(PASSIVE_MARKER))
        .enumerate()
        .map(|(i, n)| Source {
            source_id: i,
            canonical_name: n.clone(),
            mentions: Vec::new(),
            is_passive: false,
        })
        .collect()
}

fn predicted(pred: &DocumentAttribution, sentence: usize) -> Vec<&Source> {
    pred.sources
        .iter()
        .filter(|s| pred.map.attributes(sentence, s.source_id))
        .collect()
}

fn is_unnamed(s: &Source) -> bool {
    s.is_passive || is_null_answer(&s.canonical_name) || s.canonical_name.trim().eq_ignore_ascii_case(PASSIVE_MARKER)
}

fn names_match(pred: &[&Source], gold: &GoldLabel) -> bool {
    let golds = gold_sources(gold);
    pred.iter()
        .filter(|s| !is_unnamed(s))
        .any(|s| matches!(resolve_retrieved_name(&s.canonical_name, &golds), Resolution::Matched(_)))
}

/// Retrieval verdict for a gold-sourced sentence; `None` when the sentence is
/// not scored. A passive gold sentence is correct when the prediction names no
/// one (unattributed, passive or a null answer).
pub fn retrieval_correct(pred: &DocumentAttribution, sentence: usize, gold: &GoldLabel, opts: EvalOptions) -> Option<bool> {
    if !gold.is_sourced || (opts.strict_passive && gold.is_passive()) {
        return None;
    }
    let p = predicted(pred, sentence);
    if names_match(&p, gold) {
        return Some(true);
    }
    Some(gold.is_passive() && (p.is_empty() || p.iter().any(|s| is_unnamed(s))))
}

/// End-to-end verdict: detection and retrieval both right.
pub fn end_to_end_correct(pred: &DocumentAttribution, sentence: usize, gold: &GoldLabel) -> bool {
    let p = predicted(pred, sentence);
    if !gold.is_sourced {
        return p.is_empty();
    }
    !p.is_empty() && (names_match(&p, gold) || (gold.is_passive() && p.iter().any(|s| is_unnamed(s))))
}

/// Retrieval accuracy over a document's gold-sourced sentences (optionally one group).
pub fn retrieval_accuracy(
    doc: &Document,
    pred: &DocumentAttribution,
    grouping: &ChannelGrouping,
    group: Option<&str>,
    opts: EvalOptions,
) -> Option<f64> {
    let mut t = Tally::default();
    for s in &doc.sentences {
        let Some(g) = &s.gold else { continue };
        if group.is_some_and(|name| !g.is_sourced || grouping.group_of(g.channel, s) != name) {
            continue;
        }
        if let Some(ok) = retrieval_correct(pred, s.index, g, opts) {
            t.add(ok);
        }
    }
    t.accuracy()
}

/// End-to-end accuracy over every gold-labelled sentence of a document.
pub fn end_to_end_accuracy(doc: &Document, pred: &DocumentAttribution) -> Option<f64> {
    let mut t = Tally::default();
    for s in &doc.sentences {
        if let Some(g) = &s.gold {
            t.add(end_to_end_correct(pred, s.index, g));
        }
    }
    t.accuracy()
}

/// Counts accumulated for one column.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct CellCounts {
    pub detection: Confusion,
    pub retrieval: Tally,
    pub end_to_end: Tally,
}

/// Per-group counts; negatives are tracked once and shared by every group.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Counts {
    pub groups: BTreeMap<String, CellCounts>,
    /// Predictions on gold-unsourced sentences: (fp, tn).
    pub negatives: (u64, u64),
    pub unsourced_end_to_end: Tally,
    pub n_sentences: u64,
}

impl Counts {
    pub fn merge(mut self, other: Counts) -> Counts {
        for (k, v) in other.groups {
            let cell = self.groups.entry(k).or_default();
            cell.detection.merge(&v.detection);
            cell.retrieval.merge(&v.retrieval);
            cell.end_to_end.merge(&v.end_to_end);
        }
        self.negatives.0 += other.negatives.0;
        self.negatives.1 += other.negatives.1;
        self.unsourced_end_to_end.merge(&other.unsourced_end_to_end);
        self.n_sentences += other.n_sentences;
        self
    }
}

/// Tallies one document. Sentences without a gold label are ignored.
pub fn count_document(
    doc: &Document,
    pred: &DocumentAttribution,
    grouping: &ChannelGrouping,
    opts: EvalOptions,
) -> Result<Counts> {
    let detected = pred.map.derive_detection(doc.len())?;
    let mut c = Counts::default();
    for s in &doc.sentences {
        let Some(g) = &s.gold else { continue };
        c.n_sentences += 1;
        let hit = detected[s.index];
        let e2e = end_to_end_correct(pred, s.index, g);
        if !g.is_sourced {
            if hit {
                c.negatives.0 += 1;
            } else {
                c.negatives.1 += 1;
            }
            c.unsourced_end_to_end.add(e2e);
            continue;
        }
        let cell = c.groups.entry(grouping.group_of(g.channel, s).to_owned()).or_default();
        cell.detection.add(hit, true);
        if let Some(ok) = retrieval_correct(pred, s.index, g, opts) {
            cell.retrieval.add(ok);
        }
        cell.end_to_end.add(e2e);
    }
    Ok(c)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CellReport {
    pub detection: Prf,
    pub confusion: Confusion,
    pub retrieval_accuracy: Option<f64>,
    pub retrieval_support: u64,
    pub end_to_end_accuracy: Option<f64>,
    pub end_to_end_support: u64,
}

impl CellReport {
    fn new(confusion: Confusion, retrieval: Tally, end_to_end: Tally) -> Self {
        Self {
            detection: confusion.scores(),
            confusion,
            retrieval_accuracy: retrieval.accuracy(),
            retrieval_support: retrieval.total,
            end_to_end_accuracy: end_to_end.accuracy(),
            end_to_end_support: end_to_end.total,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub system: String,
    pub grouping: String,
    /// How the overall column combines groups.
    pub pooling: String,
    pub strict_passive: bool,
    pub n_documents: u64,
    pub n_sentences: u64,
    /// Gold documents for which the system produced no attribution.
    pub missing_predictions: u64,
    pub overall: CellReport,
    /// In grouping column order.
    pub cells: Vec<(String, CellReport)>,
    /// End-to-end accuracy on gold-unsourced sentences.
    pub unsourced: CellReport,
}

impl EvalReport {
    pub fn cell(&self, name: &str) -> Option<&CellReport> {
        self.cells.iter().find(|(n, _)| n == name).map(|(_, c)| c)
    }
}

pub fn build_report(system: &str, grouping: &ChannelGrouping, counts: &Counts, opts: EvalOptions) -> EvalReport {
    let (fp, tn) = counts.negatives;
    let mut overall = (Confusion::default(), Tally::default(), Tally::default());
    let mut cells = Vec::new();
    for name in grouping.columns() {
        let cell = counts.groups.get(name).copied().unwrap_or_default();
        let mut conf = cell.detection;
        overall.0.merge(&conf);
        overall.1.merge(&cell.retrieval);
        overall.2.merge(&cell.end_to_end);
        conf.fp = fp;
        conf.tn = tn;
        cells.push((name.to_owned(), CellReport::new(conf, cell.retrieval, cell.end_to_end)));
    }
    overall.0.fp = fp;
    overall.0.tn = tn;
    overall.2.merge(&counts.unsourced_end_to_end);
    let unsourced_conf = Confusion {
        fp,
        tn,
        ..Default::default()
    };
    EvalReport {
        system: system.to_owned(),
        grouping: grouping.name.clone(),
        pooling: "micro".into(),
        strict_passive: opts.strict_passive,
        n_documents: 0,
        n_sentences: counts.n_sentences,
        missing_predictions: 0,
        overall: CellReport::new(overall.0, overall.1, overall.2),
        cells,
        unsourced: CellReport::new(unsourced_conf, Tally::default(), counts.unsourced_end_to_end),
    }
}

/// Scores a system over a corpus. Predictions are keyed by `(doc_id, version_id)`;
/// documents without one are scored as entirely unattributed.
pub fn evaluate(
    system: &str,
    docs: &[Document],
    predictions: &BTreeMap<(String, u32), DocumentAttribution>,
    grouping: &ChannelGrouping,
    opts: EvalOptions,
    exec: Execution,
) -> Result<EvalReport> {
    let gold_docs: Vec<&Document> = docs.iter().filter(|d| d.has_gold()).collect();
    let per_doc = parallel::map(&gold_docs, exec, |d| {
        let key = (d.doc_id.clone(), d.version_id);
        match predictions.get(&key) {
            Some(p) => count_document(d, p, grouping, opts).map(|c| (c, false)),
            None => count_document(d, &DocumentAttribution::empty(d), grouping, opts).map(|c| (c, true)),
        }
    });
    let mut total = Counts::default();
    let mut missing = 0;
    for r in per_doc {
        let (c, was_missing) = r?;
        total = total.merge(c);
        missing += was_missing as u64;
    }
    let mut report = build_report(system, grouping, &total, opts);
    report.n_documents = gold_docs.len() as u64;
    report.missing_predictions = missing;
    Ok(report)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TableRow {
    pub metric: String,
    pub system: String,
    /// Percentages; `None` renders as a dash.
    pub cells: Vec<Option<f64>>,
}

/// Systems by metrics against the overall column plus every group column.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Table {
    pub columns: Vec<String>,
    pub rows: Vec<TableRow>,
    pub note: String,
}

pub const METRICS: [&str; 3] = ["Detection F1", "Retrieval accuracy", "End-to-end accuracy"];

fn metric_value(cell: &CellReport, metric: usize) -> Option<f64> {
    match metric {
        0 => (!cell.detection.degenerate).then_some(cell.detection.f1),
        1 => cell.retrieval_accuracy,
        _ => cell.end_to_end_accuracy,
    }
    .map(|v| v * 100.0)
}

pub fn tabulate(reports: &[EvalReport]) -> Table {
    let mut columns = vec!["All".to_owned()];
    if let Some(first) = reports.first() {
        columns.extend(first.cells.iter().map(|(n, _)| n.clone()));
    }
    let mut rows = Vec::new();
    for (m, metric) in METRICS.iter().enumerate() {
        for r in reports {
            let mut cells = vec![metric_value(&r.overall, m)];
            for name in &columns[1..] {
                cells.push(r.cell(name).and_then(|c| metric_value(c, m)));
            }
            rows.push(TableRow {
                metric: (*metric).to_owned(),
                system: r.system.clone(),
                cells,
            });
        }
    }
    Table {
        columns,
        rows,
        note: "All pools counts over every column (micro).".into(),
    }
}

pub fn format_percent(v: Option<f64>) -> String {
    match v {
        Some(x) => format!("{x:.1}"),
        None => "\u{2013}".to_owned(),
    }
}

impl Table {
    /// Fixed-width text rendering.
    pub fn to_text(&self) -> String {
        let mut header = vec!["Metric".to_owned(), "System".to_owned()];
        header.extend(self.columns.iter().cloned());
        let body: Vec<Vec<String>> = self
            .rows
            .iter()
            .map(|r| {
                let mut line = vec![r.metric.clone(), r.system.clone()];
                line.extend(r.cells.iter().map(|c| format_percent(*c)));
                line
            })
            .collect();
        let width = |i: usize| {
            std::iter::once(&header)
                .chain(body.iter())
                .map(|l| l[i].chars().count())
                .max()
                .unwrap_or(0)
        };
        let widths: Vec<usize> = (0..header.len()).map(width).collect();
        let mut out = String::new();
        for line in std::iter::once(&header).chain(body.iter()) {
            let cells: Vec<String> = line
                .iter()
                .enumerate()
                .map(|(i, c)| {
                    let pad = widths[i] - c.chars().count();
                    if i < 2 {
                        format!("{c}{}", " ".repeat(pad))
                    } else {
                        format!("{}{c}", " ".repeat(pad))
                    }
                })
                .collect();
            let _ = writeln!(out, "{}", cells.join("  ").trim_end());
        }
        let _ = writeln!(out, "{}", self.note);
        out
    }
}
