//! Acceptance checks, one line per criterion.
//!
//! Run with `cargo test -p srcattr-cli --test acceptance`. Set
//! `SRCATTR_GOLD_CORPUS` to a gold-annotated DocumentRecord JSONL file to also
//! run the gold-corpus regression.

use std::collections::{BTreeMap, BTreeSet};
use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, ExitCode};
use std::time::Instant;

use rand::seq::SliceRandom;
use rand::Rng;
use serde_json::Value;
use srcattr::analytics::source_entropy;
use srcattr::eval::{
    detection_f1, end_to_end_accuracy, evaluate, retrieval_accuracy, ChannelGrouping, EvalOptions,
};
use srcattr::io;
use srcattr::model::PASSIVE_MARKER;
use srcattr::neural::{compose_pipeline, PipelineConfig, PipelineMode, Prediction, Provenance};
use srcattr::parallel::Execution;
use srcattr::probes::{
    ablate, audit_confounds, build_ablation_pair, doc_rng, parse_sa, serialize_with_sa, welch_t_test,
    AblationConfig, Difficulty, ProbeExample, ProbeFeatures, SecondRule,
};
use srcattr::rules::{canonicalize_entities, r1_attribute};
use srcattr::synthetic::{generate, noisy_predictions, SyntheticConfig};
use srcattr::{AttributionMap, Document, DocumentAttribution, GoldLabel, InformationChannel, Lexicons, Source};

type Outcome = Result<(bool, String), String>;
type Criterion<'a> = (&'static str, Box<dyn Fn() -> Option<Outcome> + 'a>);

fn bin() -> &'static str {
    env!("CARGO_BIN_EXE_srcattr")
}

fn mini_dir() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../core/data/mini_corpus")
}

fn run_cli(args: &[&str]) -> Result<String, String> {
    let out = Command::new(bin())
        .args(args)
        .output()
        .map_err(|e| format!("cannot run srcattr: {e}"))?;
    if !out.status.success() {
        return Err(format!(
            "srcattr {} exited with {:?}: {}",
            args.join(" "),
            out.status.code(),
            String::from_utf8_lossy(&out.stderr)
        ));
    }
    Ok(String::from_utf8_lossy(&out.stdout).into_owned())
}

fn p(path: &Path) -> &str {
    path.to_str().expect("utf-8 path")
}

fn read_docs(path: &Path) -> Result<Vec<Document>, String> {
    io::read_corpus(path)
        .map_err(|e| e.to_string())?
        .map(|r| r.map_err(|e| e.to_string()))
        .collect()
}

fn mini_corpus() -> Result<Vec<Document>, String> {
    read_docs(&mini_dir().join("corpus.jsonl"))
}

fn synthetic(seed: u64, n_docs: usize, versions: u32, sourced_fraction: f64) -> srcattr::synthetic::SyntheticCorpus {
    generate(&SyntheticConfig {
        seed,
        n_docs,
        versions,
        sourced_fraction,
        ..SyntheticConfig::default()
    })
}

// ---------------------------------------------------------------------------
// Independent reference implementations.

const HONORIFICS: [&str; 4] = ["mr", "ms", "mrs", "dr"];

/// Lowercase words of a name with possessive, punctuation, honorifics and a
/// leading article removed.
fn name_words(raw: &str) -> Vec<String> {
    let mut s = raw.trim().to_lowercase().replace('\u{2019}', "'");
    if s.ends_with("'s") {
        s.truncate(s.len() - 2);
    } else if s.ends_with('\'') {
        s.pop();
    }
    let mut words: Vec<String> = s
        .split(|c: char| !c.is_alphanumeric())
        .filter(|w| !w.is_empty() && !HONORIFICS.contains(w))
        .map(str::to_owned)
        .collect();
    if words.len() > 1 && ["the", "a", "an"].contains(&words[0].as_str()) {
        words.remove(0);
    }
    words
}

fn contains_run(hay: &[String], needle: &[String]) -> bool {
    !needle.is_empty() && needle.len() <= hay.len() && (0..=hay.len() - needle.len()).any(|i| hay[i..i + needle.len()] == *needle)
}

fn same_source(a: &str, b: &str) -> bool {
    let (x, y) = (name_words(a), name_words(b));
    if x.is_empty() || y.is_empty() {
        return false;
    }
    x == y || x.last() == y.last() || contains_run(&x, &y) || contains_run(&y, &x)
}

fn unnamed(s: &Source) -> bool {
    let n = s.canonical_name.trim();
    s.is_passive || n.eq_ignore_ascii_case("none") || n.eq_ignore_ascii_case(PASSIVE_MARKER)
}

fn gold_is_passive(g: &GoldLabel) -> bool {
    g.is_sourced && (g.source_names.is_empty() || g.source_names.iter().any(|n| n.trim().eq_ignore_ascii_case(PASSIVE_MARKER)))
}

struct Brute {
    f1: f64,
    retrieval: Option<f64>,
    end_to_end: Option<f64>,
}

/// Counts every sentence by hand.
fn brute_force(doc: &Document, pred: &DocumentAttribution) -> Brute {
    let (mut tp, mut fp, mut fn_) = (0u64, 0u64, 0u64);
    let (mut r_ok, mut r_n, mut e_ok, mut e_n) = (0u64, 0u64, 0u64, 0u64);
    for s in &doc.sentences {
        let Some(g) = &s.gold else { continue };
        let predicted: Vec<&Source> = pred
            .sources
            .iter()
            .filter(|src| pred.map.get(s.index).is_some_and(|set| set.iter().any(|a| a.source_id == src.source_id)))
            .collect();
        let detected = !predicted.is_empty();
        match (detected, g.is_sourced) {
            (true, true) => tp += 1,
            (true, false) => fp += 1,
            (false, true) => fn_ += 1,
            _ => {}
        }
        let named_hit = predicted.iter().filter(|x| !unnamed(x)).any(|x| {
            g.source_names
                .iter()
                .filter(|n| !n.trim().eq_ignore_ascii_case(PASSIVE_MARKER))
                .any(|n| same_source(&x.canonical_name, n))
        });
        let passive = gold_is_passive(g);
        if g.is_sourced {
            r_n += 1;
            let ok = named_hit || (passive && (predicted.is_empty() || predicted.iter().any(|x| unnamed(x))));
            r_ok += ok as u64;
        }
        e_n += 1;
        let e = if g.is_sourced {
            detected && (named_hit || (passive && predicted.iter().any(|x| unnamed(x))))
        } else {
            !detected
        };
        e_ok += e as u64;
    }
    let f1 = if tp == 0 { 0.0 } else { 2.0 * tp as f64 / (2 * tp + fp + fn_) as f64 };
    let ratio = |a: u64, b: u64| (b > 0).then(|| a as f64 / b as f64);
    Brute {
        f1,
        retrieval: ratio(r_ok, r_n),
        end_to_end: ratio(e_ok, e_n),
    }
}

fn close(a: Option<f64>, b: Option<f64>, tol: f64) -> bool {
    match (a, b) {
        (Some(x), Some(y)) => (x - y).abs() <= tol,
        (None, None) => true,
        _ => false,
    }
}

fn hand_entropy(map: &AttributionMap) -> (f64, usize) {
    let mut counts: BTreeMap<usize, f64> = BTreeMap::new();
    for (_, set) in map.entries() {
        for a in set {
            *counts.entry(a.source_id).or_default() += 1.0;
        }
    }
    let total: f64 = counts.values().sum();
    let h = counts.values().map(|c| c / total).map(|q| -q * q.ln()).sum::<f64>();
    (if total == 0.0 { 0.0 } else { h }, counts.len())
}

/// (sentence, name) pairs of an attribution; unnamed sources appear as "".
fn named_pairs(a: &DocumentAttribution) -> BTreeSet<(usize, String)> {
    let mut out = BTreeSet::new();
    for (i, set) in a.map.entries() {
        for x in set {
            let s = a.source(x.source_id).expect("known source");
            out.insert((i, if s.is_passive { String::new() } else { s.canonical_name.clone() }));
        }
    }
    out
}

/// Gold source names of a document version, normalized, without passive labels.
fn gold_names(doc: &Document) -> BTreeSet<Vec<String>> {
    doc.sentences
        .iter()
        .filter_map(|s| s.gold.as_ref())
        .flat_map(|g| g.source_names.iter())
        .filter(|n| !n.trim().eq_ignore_ascii_case(PASSIVE_MARKER))
        .map(|n| name_words(n))
        .filter(|w| !w.is_empty())
        .collect()
}

// ---------------------------------------------------------------------------
// Criteria.

fn mini_corpus_oracle(tmp: &Path) -> Outcome {
    let corpus = mini_dir().join("corpus.jsonl");
    let expected: Value = serde_json::from_str(&fs::read_to_string(mini_dir().join("expected.json")).map_err(|e| e.to_string())?)
        .map_err(|e| e.to_string())?;
    let docs = mini_corpus()?;
    if docs.len() != 20 {
        return Ok((false, format!("{} documents, expected 20", docs.len())));
    }
    let started = Instant::now();
    let mut checked = 0;
    let mut mismatches = Vec::new();
    for backend in ["r1", "r2", "patterns"] {
        let out = tmp.join(format!("mini_{backend}.jsonl"));
        run_cli(&["attribute", "--backend", backend, "--in", p(&corpus), "--out", p(&out)])?;
        let attrs: Vec<DocumentAttribution> = io::read_attributions(&out)
            .map_err(|e| e.to_string())?
            .map(|r| r.map_err(|e| e.to_string()))
            .collect::<Result<_, _>>()?;
        for a in &attrs {
            let mut got: Vec<(u64, String, String)> = a
                .map
                .entries()
                .flat_map(|(i, set)| {
                    set.iter().map(move |x| (i as u64, a.source(x.source_id).unwrap().canonical_name.clone(), x.channel.to_string()))
                })
                .collect();
            got.sort();
            let mut want: Vec<(u64, String, String)> = expected[&a.doc_id][backend]
                .as_array()
                .ok_or_else(|| format!("no oracle for {} {backend}", a.doc_id))?
                .iter()
                .map(|r| (r[0].as_u64().unwrap(), r[1].as_str().unwrap().to_owned(), r[2].as_str().unwrap().to_owned()))
                .collect();
            want.sort();
            checked += 1;
            if got != want {
                mismatches.push(format!("{}/{backend}", a.doc_id));
            }
        }
    }
    let secs = started.elapsed().as_secs_f64();
    let ok = mismatches.is_empty() && checked == 60 && secs < 5.0;
    Ok((
        ok,
        format!(
            "{checked}/60 document-backend outputs checked, {} mismatches{}, {secs:.3}s (< 5s)",
            mismatches.len(),
            if mismatches.is_empty() { String::new() } else { format!(" [{}]", mismatches.join(", ")) }
        ),
    ))
}

fn metric_oracle() -> Outcome {
    let grouping = ChannelGrouping::summary();
    let opts = EvalOptions::default();
    let lex = Lexicons::shipped();
    let corpus = synthetic(101, 50, 1, 0.5).documents;
    let mut worst = 0.0f64;
    let mut failures = 0;
    for (k, doc) in corpus.iter().enumerate() {
        let gold = DocumentAttribution::from_gold(doc);
        let mut rng = doc_rng(k as u64, &doc.doc_id, 0, "metric-oracle");
        let mut preds = noisy_predictions(doc, &gold, rng.random_range(0.0..0.7), k as u64);
        for pr in &mut preds {
            if let Some(name) = pr.retrieved_source.clone() {
                let last = name.split_whitespace().last().unwrap_or("").to_owned();
                pr.retrieved_source = Some(match rng.random_range(0..6) {
                    0 => format!("Mr. {last}"),
                    1 => last,
                    2 => "Quinn Zed".into(),
                    3 => format!("the {name}"),
                    _ => name,
                });
            }
        }
        let sources = canonicalize_entities(doc, &lex.signifiers);
        let pred = compose_pipeline(doc, &sources, &preds, Provenance::File, &PipelineConfig::default()).attribution;

        let want = brute_force(doc, &pred);
        let detected = pred.map.derive_detection(doc.len()).map_err(|e| e.to_string())?;
        let gold_vec: Vec<bool> = doc.sentences.iter().map(|s| s.gold.as_ref().is_some_and(|g| g.is_sourced)).collect();
        let f1 = detection_f1(&detected, &gold_vec, None).map_err(|e| e.to_string())?.f1;
        let r = retrieval_accuracy(doc, &pred, &grouping, None, opts);
        let e = end_to_end_accuracy(doc, &pred);
        let report = evaluate("x", std::slice::from_ref(doc), &BTreeMap::from([((doc.doc_id.clone(), 0), pred)]), &grouping, opts, Execution::Sequential)
            .map_err(|e| e.to_string())?;
        let agree = [
            close(Some(f1), Some(want.f1), 1e-9),
            close(r, want.retrieval, 1e-9),
            close(e, want.end_to_end, 1e-9),
            close(Some(report.overall.detection.f1), Some(want.f1), 1e-9),
            close(report.overall.retrieval_accuracy, want.retrieval, 1e-9),
            close(report.overall.end_to_end_accuracy, want.end_to_end, 1e-9),
        ];
        for (x, y) in [(Some(f1), Some(want.f1)), (r, want.retrieval), (e, want.end_to_end)] {
            if let (Some(x), Some(y)) = (x, y) {
                worst = worst.max((x - y).abs());
            }
        }
        if !agree.iter().all(|a| *a) {
            failures += 1;
        }
    }
    Ok((failures == 0, format!("50 pairs, {failures} disagreements, max |diff| {worst:.1e} (tol 1e-9)")))
}

fn majority_baseline(tmp: &Path) -> Outcome {
    // Mini-corpus through the CLI, with an empty prediction file.
    let empty = tmp.join("empty_pred.jsonl");
    fs::write(&empty, "").map_err(|e| e.to_string())?;
    let out_json = tmp.join("majority_eval.json");
    let corpus = mini_dir().join("corpus.jsonl");
    run_cli(&["evaluate", "--gold", p(&corpus), "--pred", p(&empty), "--out", p(&out_json)])?;
    let report: Value = serde_json::from_str(&fs::read_to_string(&out_json).map_err(|e| e.to_string())?).map_err(|e| e.to_string())?;
    let got_mini = report["reports"][0]["overall"]["end_to_end_accuracy"].as_f64().ok_or("missing accuracy")?;
    let docs = mini_corpus()?;
    let labels: Vec<bool> = docs.iter().flat_map(|d| &d.sentences).filter_map(|s| s.gold.as_ref()).map(|g| g.is_sourced).collect();
    let n_sourced = labels.iter().filter(|x| **x).count();
    let want_mini = (labels.len() - n_sourced) as f64 / labels.len() as f64;

    // Synthetic corpus relabelled to exactly 469 sourced of 1000 sentences.
    let mut docs = synthetic(7, 80, 1, 0.5).documents;
    let mut remaining = 1000usize;
    docs.retain_mut(|d| {
        if remaining == 0 {
            return false;
        }
        let keep = d.sentences.len().min(remaining);
        d.sentences.truncate(keep);
        remaining -= keep;
        true
    });
    if remaining != 0 {
        return Err("synthetic corpus shorter than 1000 sentences".into());
    }
    let mut order: Vec<usize> = (0..1000).collect();
    order.shuffle(&mut doc_rng(3, "majority", 0, "relabel"));
    let sourced: BTreeSet<usize> = order[..469].iter().copied().collect();
    let mut k = 0;
    for d in &mut docs {
        for s in &mut d.sentences {
            let original = s.gold.take().unwrap_or_else(GoldLabel::unsourced);
            s.gold = Some(if !sourced.contains(&k) {
                GoldLabel::unsourced()
            } else if original.is_sourced {
                original
            } else {
                GoldLabel {
                    is_sourced: true,
                    source_names: vec![PASSIVE_MARKER.into()],
                    channel: InformationChannel::Statement,
                }
            });
            k += 1;
        }
    }
    let report = evaluate("all-negative", &docs, &BTreeMap::new(), &ChannelGrouping::summary(), EvalOptions::default(), Execution::Parallel)
        .map_err(|e| e.to_string())?;
    let got_syn = report.overall.end_to_end_accuracy.ok_or("missing accuracy")?;
    let ok = got_mini == want_mini && got_syn == 531.0 / 1000.0 && (got_syn - 0.531).abs() < 1e-12;
    Ok((
        ok,
        format!("mini-corpus {got_mini:.6} vs 1-{:.6}; synthetic 46.9% sourced -> {got_syn:.6} (want 0.531)", 1.0 - want_mini),
    ))
}

fn entropy_properties() -> Outcome {
    let mut rng = doc_rng(0, "entropy", 0, "maps");
    let mut violations = 0;
    let mut max_diff = 0.0f64;
    for _ in 0..1000 {
        let n_sentences = rng.random_range(1..40);
        let k = rng.random_range(1..9);
        let mut map = AttributionMap::new();
        for i in 0..n_sentences {
            for src in 0..k {
                if rng.random_bool(0.3) {
                    map.insert(i, src, InformationChannel::Statement);
                }
            }
        }
        let h = source_entropy(&map);
        let (want, used) = hand_entropy(&map);
        max_diff = max_diff.max((h - want).abs());
        let bound = if used == 0 { 0.0 } else { (used as f64).ln() };
        if h < -1e-9 || h > bound + 1e-9 || (h - want).abs() > 1e-9 {
            violations += 1;
        }
    }
    let mut equality = 0;
    for k in 1..=8usize {
        let mut uniform = AttributionMap::new();
        let mut degenerate = AttributionMap::new();
        for src in 0..k {
            for j in 0..3 {
                uniform.insert(src * 3 + j, src, InformationChannel::Statement);
                degenerate.insert(src * 3 + j, 0, InformationChannel::Statement);
            }
        }
        if ((source_entropy(&uniform) - (k as f64).ln()).abs() > 1e-9) || source_entropy(&degenerate).abs() > 1e-9 {
            equality += 1;
        }
    }
    Ok((
        violations == 0 && equality == 0,
        format!("1000 maps, {violations} bound violations, max |H - H_ref| {max_diff:.1e}; {equality} failed equality cases of 16"),
    ))
}

fn ablation_invariants(tmp: &Path) -> Outcome {
    let corpus = synthetic(23, 700, 1, 0.35).documents;
    let docs_path = tmp.join("ablation_docs.jsonl");
    io::write_corpus(&docs_path, &corpus).map_err(|e| e.to_string())?;
    let (a, b) = (tmp.join("ablation_a.jsonl"), tmp.join("ablation_b.jsonl"));
    for out in [&a, &b] {
        run_cli(&["build-probes", "--probe", "ablation", "--in", p(&docs_path), "--out", p(out), "--difficulty", "any", "--seed", "13"])?;
    }
    let bytes_a = fs::read(&a).map_err(|e| e.to_string())?;
    let identical = bytes_a == fs::read(&b).map_err(|e| e.to_string())?;

    let examples: Vec<ProbeExample> = io::read_probes(&a)
        .map_err(|e| e.to_string())?
        .map(|r| r.map_err(|e| e.to_string()))
        .collect::<Result<_, _>>()?;
    let by_id: BTreeMap<&str, &Document> = corpus.iter().map(|d| (d.doc_id.as_str(), d)).collect();
    let mut pairs: BTreeMap<&str, [Option<&ProbeExample>; 2]> = BTreeMap::new();
    for e in &examples {
        pairs.entry(e.doc_id.as_str()).or_default()[e.label as usize] = Some(e);
    }
    let mut bad = Vec::new();
    let mut checked = 0;
    for (doc_id, [neg, pos]) in pairs.iter().take(500) {
        let (Some(neg), Some(pos)) = (neg, pos) else {
            bad.push(format!("{doc_id}: unpaired"));
            continue;
        };
        checked += 1;
        let doc = by_id[doc_id];
        let attr = DocumentAttribution::from_gold(doc);
        let name = pos.chosen_source.as_deref().unwrap_or_default();
        let Some(q) = attr.sources.iter().find(|s| !s.is_passive && s.canonical_name == name).map(|s| s.source_id) else {
            bad.push(format!("{doc_id}: chosen source {name:?} unknown"));
            continue;
        };
        let q_sents: Vec<usize> = (0..doc.len()).filter(|&i| attr.map.attributes(i, q)).collect();
        let (pos_doc, pos_attr) = ablate(doc, &attr, &pos.removed_sentence_indices);
        let (neg_doc, neg_attr) = ablate(doc, &attr, &neg.removed_sentence_indices);
        let residual = (0..pos_doc.len()).filter(|&i| pos_attr.map.attributes(i, q)).count();
        let retained = (0..neg_doc.len()).filter(|&i| neg_attr.map.attributes(i, q)).count();
        let checks = [
            pos.removed_sentence_indices.len() == neg.removed_sentence_indices.len(),
            pos.removed_sentence_indices == q_sents,
            residual == 0,
            retained == q_sents.len(),
            neg.removed_sentence_indices.iter().all(|&i| !attr.map.is_attributed(i)),
            pos.text == pos_doc.article_text() && neg.text == neg_doc.article_text(),
        ];
        if !checks.iter().all(|c| *c) {
            bad.push(format!("{doc_id}: {checks:?}"));
        }
    }
    let n_pos = examples.iter().filter(|e| e.label == 1).count();
    let n_neg = examples.len() - n_pos;
    let ok = checked >= 500 && bad.is_empty() && n_pos == n_neg && identical;
    Ok((
        ok,
        format!(
            "{checked} pairs checked, {} violations, labels {n_pos}/{n_neg}, regeneration byte-identical: {identical}{}",
            bad.len(),
            bad.first().map(|b| format!(" (first: {b})")).unwrap_or_default()
        ),
    ))
}

fn second_rule_distribution() -> Outcome {
    let doc = generate(&SyntheticConfig {
        seed: 5,
        n_docs: 1,
        min_sentences: 30,
        max_sentences: 30,
        ..SyntheticConfig::default()
    })
    .documents
    .remove(0);
    let mut attr = DocumentAttribution::empty(&doc);
    let mut next = 0;
    for (id, (name, count)) in [("Ana Sol", 6), ("Ben Ruiz", 5), ("Cai Tan", 4), ("Dee Kim", 2)].into_iter().enumerate() {
        attr.sources.push(Source {
            source_id: id,
            canonical_name: name.into(),
            mentions: Vec::new(),
            is_passive: false,
        });
        for _ in 0..count {
            attr.map.insert(next, id, InformationChannel::Statement);
            next += 1;
        }
    }
    let lex = Lexicons::shipped();
    let mut tally: BTreeMap<String, usize> = BTreeMap::new();
    for seed in 0..3000u64 {
        let cfg = AblationConfig {
            difficulty: Difficulty::Second,
            second_rule: SecondRule::Top3,
            seed,
            control: false,
            with_sa: false,
        };
        let pair = build_ablation_pair(&doc, &attr, &lex, &cfg).map_err(|s| s.reason)?;
        *tally.entry(pair.positive.chosen_source.unwrap_or_default()).or_default() += 1;
    }
    let share = |n: &str| tally.get(n).copied().unwrap_or(0) as f64 / 3000.0;
    let top3 = ["Ana Sol", "Ben Ruiz", "Cai Tan"];
    let ok = top3.iter().all(|n| (share(n) - 1.0 / 3.0).abs() <= 0.03) && share("Dee Kim") == 0.0;
    Ok((
        ok,
        format!(
            "3000 seeds: {} (each within 33.3% ± 3pp), 4th-ranked {:.1}%",
            top3.iter().map(|n| format!("{:.1}%", 100.0 * share(n))).collect::<Vec<_>>().join(" / "),
            100.0 * share("Dee Kim")
        ),
    ))
}

fn newsedits_probe(tmp: &Path) -> Outcome {
    let corpus = synthetic(31, 100, 3, 0.5);
    if corpus.version_pairs.len() != 200 {
        return Err(format!("{} version pairs, expected 200", corpus.version_pairs.len()));
    }
    let docs_path = tmp.join("ne_docs.jsonl");
    let pairs_path = tmp.join("ne_pairs.jsonl");
    io::write_corpus(&docs_path, &corpus.documents).map_err(|e| e.to_string())?;
    io::write_version_pairs(&pairs_path, &corpus.version_pairs).map_err(|e| e.to_string())?;
    let (all_path, bal_path) = (tmp.join("ne_all.jsonl"), tmp.join("ne_bal.jsonl"));
    let base = ["build-probes", "--probe", "newsedits", "--in", p(&docs_path), "--pairs", p(&pairs_path), "--seed", "4"];
    run_cli(&[&base[..], &["--out", p(&all_path), "--unbalanced"]].concat())?;
    run_cli(&[&base[..], &["--out", p(&bal_path)]].concat())?;
    let read = |path: &Path| -> Result<Vec<ProbeExample>, String> {
        io::read_probes(path)
            .map_err(|e| e.to_string())?
            .map(|r| r.map_err(|e| e.to_string()))
            .collect()
    };
    let all = read(&all_path)?;
    let balanced = read(&bal_path)?;

    let by_key: BTreeMap<(&str, u32), &Document> = corpus.documents.iter().map(|d| ((d.doc_id.as_str(), d.version_id), d)).collect();
    let mut agree = 0;
    let mut label_counts = [0usize; 2];
    for e in &all {
        let t1 = e.version_t_plus_1.ok_or("missing t+1")?;
        let before = gold_names(by_key[&(e.doc_id.as_str(), e.version_id)]);
        let after = gold_names(by_key[&(e.doc_id.as_str(), t1)]);
        let added = after.difference(&before).count();
        let want = (added >= 2) as u8;
        agree += (want == e.label) as usize;
        label_counts[want as usize] += 1;
    }
    let mut strata: BTreeMap<&str, [usize; 2]> = BTreeMap::new();
    for e in balanced.iter().filter(|e| !e.excluded) {
        strata.entry(e.stratum.as_deref().unwrap_or("")).or_default()[e.label as usize] += 1;
    }
    let unbalanced_strata = strata.values().filter(|c| c[0] != c[1]).count();
    let ok = all.len() == 200 && agree == 200 && unbalanced_strata == 0 && label_counts[0] > 0 && label_counts[1] > 0;
    Ok((
        ok,
        format!(
            "{agree}/{} labels match the >=2 rule ({} positive, {} negative); {} balanced strata, {unbalanced_strata} unequal",
            all.len(),
            label_counts[1],
            label_counts[0],
            strata.len()
        ),
    ))
}

fn probe_with(label: u8, v: usize) -> ProbeExample {
    ProbeExample {
        probe_id: format!("p{label}-{v}"),
        doc_id: "d".into(),
        version_id: 0,
        version_t_plus_1: None,
        label,
        difficulty: Difficulty::Top,
        text: String::new(),
        sa_text: None,
        removed_sentence_indices: Vec::new(),
        chosen_source: None,
        topic: None,
        features: ProbeFeatures {
            speaking_verbs: v,
            persons: v,
            signifiers: v,
            sentences: v,
            chars: v,
        },
        eval_only: false,
        excluded: false,
        stratum: None,
    }
}

fn confound_audit() -> Outcome {
    let mut rng = doc_rng(9, "audit", 0, "values");
    let values: Vec<usize> = (0..100).map(|_| rng.random_range(5..60)).collect();
    let identical: Vec<ProbeExample> = [0u8, 1].iter().flat_map(|&l| values.iter().map(move |&v| probe_with(l, v))).collect();
    let same = audit_confounds(&identical);
    let same_ok = same.features.iter().all(|f| f.test.is_some_and(|t| (t.p - 1.0).abs() < 1e-9)) && same.flagged.is_empty();

    let separated: Vec<ProbeExample> = (0..100)
        .flat_map(|k| [probe_with(0, 10 + k % 5), probe_with(1, 40 + k % 7)])
        .collect();
    let sep = audit_confounds(&separated);
    let sep_ok = sep.features.iter().all(|f| f.test.is_some_and(|t| t.p < 0.01)) && sep.flagged.len() == 5;

    // Means 34 vs 32, sd about 10, 200 per class.
    let mirror: Vec<ProbeExample> = (0..200)
        .flat_map(|k| [probe_with(0, if k % 2 == 0 { 24 } else { 44 }), probe_with(1, if k % 2 == 0 { 22 } else { 42 })])
        .collect();
    let mir = audit_confounds(&mirror);
    let mir_p = mir.features[0].test.map(|t| t.p).unwrap_or(f64::NAN);
    // Reference two-sided Welch p-values computed independently.
    let mir_ok = mir.flagged.is_empty() && (mir_p - 0.046_724_995).abs() < 1e-6;
    let d = 99.5f64.sqrt();
    let exact = |m: f64| -> Vec<f64> { (0..200).map(|k| if k % 2 == 0 { m - d } else { m + d }).collect() };
    let w = welch_t_test(&exact(34.0), &exact(32.0)).ok_or("no test")?;
    let exact_ok = (w.p - 0.046_179_345).abs() < 1e-6 && w.p >= 0.01;

    Ok((
        same_ok && sep_ok && mir_ok && exact_ok,
        format!(
            "identical p={:.6}; separated max p={:.1e}; 34 vs 32 (sd 10, n=200) p={mir_p:.4} and exact-moment p={:.4}, not significant at 0.01",
            same.features.iter().filter_map(|f| f.test.map(|t| t.p)).fold(f64::NAN, f64::min),
            sep.features.iter().filter_map(|f| f.test.map(|t| t.p)).fold(0.0, f64::max),
            w.p
        ),
    ))
}

fn pipeline_semantics() -> Outcome {
    let lex = Lexicons::shipped();
    let mut docs = mini_corpus()?;
    docs.extend(synthetic(77, 40, 1, 0.5).documents);
    let mut violations = 0;
    let mut nonempty = 0;
    for set in 0..1000u64 {
        let doc = &docs[set as usize % docs.len()];
        let gold = DocumentAttribution::from_gold(doc);
        let names: Vec<String> = gold.sources.iter().filter(|s| !s.is_passive).map(|s| s.canonical_name.clone()).collect();
        let mut rng = doc_rng(set, &doc.doc_id, 0, "pipeline-sets");
        let preds: Vec<Prediction> = (0..doc.len())
            .map(|i| Prediction {
                doc_id: doc.doc_id.clone(),
                sentence_index: i,
                detector_score: Some(rng.random_range(0.0..1.0)),
                retrieved_source: match rng.random_range(0..5) {
                    0 => None,
                    1 => Some("None".into()),
                    2 => Some("none".into()),
                    3 => Some(format!("Person {}", rng.random_range(0..4))),
                    _ => names.get(rng.random_range(0..names.len().max(1))).cloned().or(Some("None".into())),
                },
            })
            .collect();
        let sources = canonicalize_entities(doc, &lex.signifiers);
        let threshold = rng.random_range(0.05..0.95);
        let run = |mode| {
            let cfg = PipelineConfig {
                mode,
                detection_threshold: threshold,
                ..PipelineConfig::default()
            };
            compose_pipeline(doc, &sources, &preds, Provenance::File, &cfg).attribution
        };
        let full = run(PipelineMode::Pipeline);
        let nones = run(PipelineMode::PipelinePlusNones);
        nonempty += (!nones.map.is_empty()) as usize;
        let subset = named_pairs(&nones).is_subset(&named_pairs(&full))
            && (0..doc.len()).all(|i| !nones.map.is_attributed(i) || full.map.is_attributed(i));
        violations += (!subset) as usize;
    }
    Ok((violations == 0, format!("1000 prediction sets ({nonempty} non-empty), {violations} violations")))
}

fn sa_round_trip() -> Outcome {
    let lex = Lexicons::shipped();
    let mini = mini_corpus()?;
    let random = synthetic(55, 500, 1, 0.6).documents;
    let mut attrs: Vec<(&Document, DocumentAttribution)> = Vec::new();
    for d in &mini {
        attrs.push((d, DocumentAttribution::from_gold(d)));
        attrs.push((d, r1_attribute(d, &lex).attribution));
    }
    for d in &random {
        attrs.push((d, DocumentAttribution::from_gold(d)));
    }
    let mut pairs = 0;
    let mut lost = 0;
    for (d, a) in &attrs {
        let parsed = parse_sa(&serialize_with_sa(d, a));
        if parsed.len() != d.len() {
            lost += d.len();
            continue;
        }
        for (s, (text, names)) in d.sentences.iter().zip(&parsed) {
            let want: Vec<&str> = a.names_of(s.index);
            pairs += want.len().max(1);
            if &s.text != text || want != names.iter().map(String::as_str).collect::<Vec<_>>() {
                lost += 1;
            }
        }
    }
    Ok((
        lost == 0,
        format!("{} mini-corpus attributions + {} random docs, {pairs} (sentence, source) entries, {lost} not recovered", mini.len() * 2, random.len()),
    ))
}

fn gold_regression(tmp: &Path) -> Option<Outcome> {
    let path = std::env::var_os("SRCATTR_GOLD_CORPUS")?;
    let gold = PathBuf::from(path);
    let run = || -> Outcome {
        let mut f1 = Vec::new();
        for backend in ["r1", "r2"] {
            let attr = tmp.join(format!("gold_{backend}.jsonl"));
            let report = tmp.join(format!("gold_{backend}.eval.json"));
            run_cli(&["attribute", "--backend", backend, "--in", p(&gold), "--out", p(&attr)])?;
            run_cli(&["evaluate", "--gold", p(&gold), "--pred", p(&attr), "--out", p(&report)])?;
            let v: Value = serde_json::from_str(&fs::read_to_string(&report).map_err(|e| e.to_string())?).map_err(|e| e.to_string())?;
            f1.push(100.0 * v["reports"][0]["overall"]["detection"]["f1"].as_f64().ok_or("missing f1")?);
        }
        let ok = (f1[0] - 59.1).abs() <= 5.0 && (f1[1] - 68.8).abs() <= 5.0;
        Ok((ok, format!("detection F1 R1 {:.1} (59.1 ± 5), R2 {:.1} (68.8 ± 5)", f1[0], f1[1])))
    };
    Some(run())
}

fn main() -> ExitCode {
    let tmp = tempfile::tempdir().expect("temporary directory");
    let dir = tmp.path();
    let criteria: Vec<Criterion> = vec![
        ("mini-corpus oracle", Box::new(|| Some(mini_corpus_oracle(dir)))),
        ("metric oracle", Box::new(|| Some(metric_oracle()))),
        ("majority baseline", Box::new(|| Some(majority_baseline(dir)))),
        ("entropy properties", Box::new(|| Some(entropy_properties()))),
        ("ablation probe invariants", Box::new(|| Some(ablation_invariants(dir)))),
        ("SECOND-rule distribution", Box::new(|| Some(second_rule_distribution()))),
        ("NewsEdits probe", Box::new(|| Some(newsedits_probe(dir)))),
        ("confound audit", Box::new(|| Some(confound_audit()))),
        ("pipeline semantics", Box::new(|| Some(pipeline_semantics()))),
        ("+SA round-trip", Box::new(|| Some(sa_round_trip()))),
        ("gold-corpus regression (optional)", Box::new(|| gold_regression(dir))),
    ];
    let mut failed = 0;
    for (name, check) in &criteria {
        match check() {
            None => println!("SKIP  {name}: set SRCATTR_GOLD_CORPUS to a gold-annotated corpus to run"),
            Some(Ok((true, detail))) => println!("PASS  {name}: {detail}"),
            Some(Ok((false, detail))) => {
                failed += 1;
                println!("FAIL  {name}: {detail}");
            }
            Some(Err(e)) => {
                failed += 1;
                println!("FAIL  {name}: {e}");
            }
        }
    }
    println!("{} criteria, {failed} failed", criteria.len());
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
