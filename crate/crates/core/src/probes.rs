//! Source-compositionality probe datasets.
//!
//! Ablation probes remove every sentence of one chosen source (`y = 1`) and
//! contrast the result with the same document minus an equal number of
//! unattributed sentences (`y = 0`). NewsEdits probes label a version pair by
//! whether the later version adds at least two new sources.
//!
//! All randomness derives from one seed mixed with the document identity, so
//! outputs do not depend on processing order or thread count.

use std::collections::{BTreeMap, BTreeSet};

use rand::seq::index;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, StudentsT};

use crate::lexicon::{contains_speaking_verb, Lexicons};
use crate::model::{AttributionMap, Document, DocumentAttribution, Sentence, SourceId, Topic};
use crate::neural::{resolve_retrieved_name, Resolution};
use crate::parallel::{self, Execution};
use crate::rules::{extract_mentions, MentionKind};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum Difficulty {
    Top,
    Second,
    Any,
    Newsedits,
}

impl Difficulty {
    pub fn as_str(self) -> &'static str {
        match self {
            Difficulty::Top => "top",
            Difficulty::Second => "second",
            Difficulty::Any => "any",
            Difficulty::Newsedits => "newsedits",
        }
    }
}

/// How `SECOND` chooses its candidates.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SecondRule {
    /// The three sources with the most sentences.
    #[default]
    Top3,
    /// Every source attributed in more than 10% of the document's sentences.
    Share10,
}

/// Lexical counts of a probe text, fixed at construction time.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ProbeFeatures {
    pub speaking_verbs: usize,
    pub persons: usize,
    pub signifiers: usize,
    pub sentences: usize,
    pub chars: usize,
}

impl ProbeFeatures {
    pub fn of(doc: &Document, lexicons: &Lexicons) -> Self {
        let mentions = extract_mentions(doc, &lexicons.signifiers);
        let text = doc.article_text();
        Self {
            speaking_verbs: doc
                .sentences
                .iter()
                .map(|s| contains_speaking_verb(s, &lexicons.verbs).len())
                .sum(),
            persons: mentions.iter().filter(|m| m.kind == MentionKind::PersonNe).count(),
            signifiers: mentions.iter().filter(|m| m.kind == MentionKind::Signifier).count(),
            sentences: doc.len(),
            chars: text.chars().count(),
        }
    }

    pub const NAMES: [&'static str; 5] = ["speaking_verbs", "persons", "signifiers", "sentences", "chars"];

    pub fn values(&self) -> [f64; 5] {
        [
            self.speaking_verbs as f64,
            self.persons as f64,
            self.signifiers as f64,
            self.sentences as f64,
            self.chars as f64,
        ]
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ProbeExample {
    pub probe_id: String,
    pub doc_id: String,
    pub version_id: u32,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub version_t_plus_1: Option<u32>,
    pub label: u8,
    pub difficulty: Difficulty,
    pub text: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sa_text: Option<String>,
    pub removed_sentence_indices: Vec<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub chosen_source: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub topic: Option<Topic>,
    pub features: ProbeFeatures,
    /// Not meant for training (non-ablated control negatives).
    #[serde(default)]
    pub eval_only: bool,
    /// Left out of the balanced dataset (single-class stratum).
    #[serde(default)]
    pub excluded: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub stratum: Option<String>,
}

fn fnv1a(bytes: &[u8]) -> u64 {
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    for b in bytes {
        h ^= *b as u64;
        h = h.wrapping_mul(0x0100_0000_01b3);
    }
    h
}

/// Generator for one (document, version, purpose) triple.
pub fn doc_rng(seed: u64, doc_id: &str, version: u32, purpose: &str) -> ChaCha8Rng {
    let key = format!("{doc_id}\u{0}{version}\u{0}{purpose}");
    ChaCha8Rng::seed_from_u64(seed ^ fnv1a(key.as_bytes()))
}

/// Named, attributed sources ranked by sentence count, ties by list order
/// (which is first-mention order).
pub fn rank_sources(attr: &DocumentAttribution) -> Vec<(SourceId, usize)> {
    let counts = attr.map.sentence_counts();
    let mut ranked: Vec<(usize, SourceId, usize)> = attr
        .sources
        .iter()
        .enumerate()
        .filter(|(_, s)| !s.is_passive)
        .filter_map(|(pos, s)| counts.get(&s.source_id).map(|&c| (pos, s.source_id, c)))
        .collect();
    ranked.sort_by(|a, b| b.2.cmp(&a.2).then(a.0.cmp(&b.0)));
    ranked.into_iter().map(|(_, id, c)| (id, c)).collect()
}

/// Picks the source to ablate; `None` when the document has no eligible source.
pub fn select_source<R: Rng>(
    attr: &DocumentAttribution,
    n_sentences: usize,
    difficulty: Difficulty,
    rule: SecondRule,
    rng: &mut R,
) -> Option<SourceId> {
    let ranked = rank_sources(attr);
    let pick = |pool: &[(SourceId, usize)], rng: &mut R| {
        (!pool.is_empty()).then(|| pool[rng.random_range(0..pool.len())].0)
    };
    match difficulty {
        Difficulty::Top => ranked.first().map(|r| r.0),
        Difficulty::Second => match rule {
            SecondRule::Top3 => pick(&ranked[..ranked.len().min(3)], rng),
            SecondRule::Share10 => {
                let pool: Vec<_> = ranked
                    .iter()
                    .copied()
                    .filter(|(_, c)| *c as f64 > 0.1 * n_sentences as f64)
                    .collect();
                pick(&pool, rng)
            }
        },
        Difficulty::Any => pick(&ranked, rng),
        Difficulty::Newsedits => None,
    }
}

/// The document and attribution left after deleting `removed` (sorted) sentences.
/// Surviving sentences are renumbered and sources left without sentences dropped.
pub fn ablate(doc: &Document, attr: &DocumentAttribution, removed: &[usize]) -> (Document, DocumentAttribution) {
    let gone: BTreeSet<usize> = removed.iter().copied().collect();
    let mut new_index = BTreeMap::new();
    let mut sentences = Vec::new();
    for s in &doc.sentences {
        if gone.contains(&s.index) {
            continue;
        }
        new_index.insert(s.index, sentences.len());
        sentences.push(Sentence {
            index: sentences.len(),
            ..s.clone()
        });
    }
    let mut map = AttributionMap::new();
    for (i, set) in attr.map.entries() {
        if let Some(&j) = new_index.get(&i) {
            for a in set {
                map.insert(j, a.source_id, a.channel);
            }
        }
    }
    let mut sources = attr.sources.clone();
    for s in &mut sources {
        s.mentions = s
            .mentions
            .iter()
            .filter_map(|m| new_index.get(&m.sentence).map(|&j| crate::model::Mention { sentence: j, ..*m }))
            .collect();
    }
    let mut out_attr = DocumentAttribution {
        doc_id: attr.doc_id.clone(),
        version_id: attr.version_id,
        sources,
        map,
    };
    out_attr.prune_unused();
    (
        Document {
            sentences,
            ..doc.clone()
        },
        out_attr,
    )
}

/// `<sentence> SOURCE: <names or None>.` per sentence, joined by spaces.
pub fn serialize_with_sa(doc: &Document, attr: &DocumentAttribution) -> String {
    doc.sentences
        .iter()
        .map(|s| {
            let names = attr.names_of(s.index);
            let label = if names.is_empty() { "None".to_owned() } else { names.join(", ") };
            format!("{} SOURCE: {label}.", s.text)
        })
        .collect::<Vec<_>>()
        .join(" ")
}

/// Inverse of [`serialize_with_sa`] for sentences without ` SOURCE: ` and names
/// without `, ` or `. `.
pub fn parse_sa(text: &str) -> Vec<(String, Vec<String>)> {
    let parts: Vec<&str> = text.split(" SOURCE: ").collect();
    let mut out = Vec::new();
    let mut sentence = parts[0].to_owned();
    for (k, part) in parts.iter().enumerate().skip(1) {
        let (label, rest) = if k + 1 == parts.len() {
            (part.strip_suffix('.').unwrap_or(part), "")
        } else {
            match part.split_once(". ") {
                Some((l, r)) => (l, r),
                None => (*part, ""),
            }
        };
        let names = if label == "None" {
            Vec::new()
        } else {
            label.split(", ").map(str::to_owned).collect()
        };
        out.push((std::mem::take(&mut sentence), names));
        sentence = rest.to_owned();
    }
    out
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AblationConfig {
    pub difficulty: Difficulty,
    pub second_rule: SecondRule,
    pub seed: u64,
    /// Negatives are the unablated document, flagged evaluation-only.
    pub control: bool,
    pub with_sa: bool,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Skip {
    pub doc_id: String,
    pub version_id: u32,
    pub reason: String,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct AblationPair {
    pub positive: ProbeExample,
    pub negative: ProbeExample,
    pub chosen_source: SourceId,
}

pub fn build_ablation_pair(
    doc: &Document,
    attr: &DocumentAttribution,
    lexicons: &Lexicons,
    cfg: &AblationConfig,
) -> std::result::Result<AblationPair, Skip> {
    let skip = |reason: String| Skip {
        doc_id: doc.doc_id.clone(),
        version_id: doc.version_id,
        reason,
    };
    let mut rng = doc_rng(cfg.seed, &doc.doc_id, doc.version_id, cfg.difficulty.as_str());
    let q = select_source(attr, doc.len(), cfg.difficulty, cfg.second_rule, &mut rng)
        .ok_or_else(|| skip("no eligible source".into()))?;
    let q_sentences: Vec<usize> = (0..doc.len()).filter(|&i| attr.map.attributes(i, q)).collect();
    let unattributed: Vec<usize> = (0..doc.len()).filter(|&i| !attr.map.is_attributed(i)).collect();
    if q_sentences.len() > unattributed.len() && !cfg.control {
        return Err(skip(format!(
            "chosen source has {} sentences but only {} are unattributed",
            q_sentences.len(),
            unattributed.len()
        )));
    }
    let q_name = attr.source(q).map(|s| s.canonical_name.clone());
    let example = |label: u8, removed: Vec<usize>, eval_only: bool| {
        let (d, a) = ablate(doc, attr, &removed);
        ProbeExample {
            probe_id: format!(
                "{}@{}:{}:{}",
                doc.doc_id,
                doc.version_id,
                cfg.difficulty.as_str(),
                if label == 1 { "pos" } else { "neg" }
            ),
            doc_id: doc.doc_id.clone(),
            version_id: doc.version_id,
            version_t_plus_1: None,
            label,
            difficulty: cfg.difficulty,
            text: d.article_text(),
            sa_text: cfg.with_sa.then(|| serialize_with_sa(&d, &a)),
            removed_sentence_indices: removed,
            chosen_source: q_name.clone(),
            topic: doc.topic,
            features: ProbeFeatures::of(&d, lexicons),
            eval_only,
            excluded: false,
            stratum: None,
        }
    };
    let negative = if cfg.control {
        example(0, Vec::new(), true)
    } else {
        let mut picked: Vec<usize> = index::sample(&mut rng, unattributed.len(), q_sentences.len())
            .into_iter()
            .map(|k| unattributed[k])
            .collect();
        picked.sort_unstable();
        example(0, picked, false)
    };
    Ok(AblationPair {
        positive: example(1, q_sentences, cfg.control),
        negative,
        chosen_source: q,
    })
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct ProbeOutput {
    pub examples: Vec<ProbeExample>,
    pub skips: Vec<Skip>,
    pub warnings: Vec<String>,
}

/// Ablation pairs for a corpus in input order, positive before negative.
pub fn build_ablation_dataset(
    pairs: &[(&Document, &DocumentAttribution)],
    lexicons: &Lexicons,
    cfg: &AblationConfig,
    exec: Execution,
) -> ProbeOutput {
    let built = parallel::map(pairs, exec, |(d, a)| build_ablation_pair(d, a, lexicons, cfg));
    let mut out = ProbeOutput::default();
    for r in built {
        match r {
            Ok(p) => {
                out.examples.push(p.positive);
                out.examples.push(p.negative);
            }
            Err(s) => out.skips.push(s),
        }
    }
    out
}

/// Sources of version `t+1` whose names resolve to no source of version `t`.
pub fn count_added_sources(attr_t: &DocumentAttribution, attr_t1: &DocumentAttribution) -> usize {
    let before: Vec<_> = attr_t.used_sources().filter(|s| !s.is_passive).cloned().collect();
    attr_t1
        .used_sources()
        .filter(|s| !s.is_passive)
        .filter(|s| resolve_retrieved_name(&s.canonical_name, &before) == Resolution::Unmatched)
        .count()
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct EditCounts {
    pub added: usize,
    pub deleted: usize,
    pub edited: usize,
}

impl EditCounts {
    pub fn total(&self) -> usize {
        self.added + self.deleted + self.edited
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct VersionPair {
    pub doc_id: String,
    pub version_t: u32,
    pub version_t_plus_1: u32,
    pub edit_counts: EditCounts,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NewsEditsConfig {
    pub seed: u64,
    pub length_bins: usize,
    pub edit_bins: usize,
    pub with_sa: bool,
    /// Keep every candidate instead of balancing strata.
    pub unbalanced: bool,
}

impl Default for NewsEditsConfig {
    fn default() -> Self {
        Self {
            seed: 0,
            length_bins: 10,
            edit_bins: 3,
            with_sa: false,
            unbalanced: false,
        }
    }
}

/// One version pair ready for labelling.
pub struct NewsEditsInput<'a> {
    pub pair: &'a VersionPair,
    pub doc_t: &'a Document,
    pub attr_t: &'a DocumentAttribution,
    pub attr_t1: &'a DocumentAttribution,
}

/// y = 1 when at least two sources were added.
pub fn newsedits_label(added: usize) -> u8 {
    (added >= 2) as u8
}

pub fn build_newsedits_example(input: &NewsEditsInput, lexicons: &Lexicons, with_sa: bool) -> ProbeExample {
    let added = count_added_sources(input.attr_t, input.attr_t1);
    let d = input.doc_t;
    ProbeExample {
        probe_id: format!("{}@{}->{}", d.doc_id, input.pair.version_t, input.pair.version_t_plus_1),
        doc_id: d.doc_id.clone(),
        version_id: input.pair.version_t,
        version_t_plus_1: Some(input.pair.version_t_plus_1),
        label: newsedits_label(added),
        difficulty: Difficulty::Newsedits,
        text: d.article_text(),
        sa_text: with_sa.then(|| serialize_with_sa(d, input.attr_t)),
        removed_sentence_indices: Vec::new(),
        chosen_source: None,
        topic: d.topic,
        features: ProbeFeatures::of(d, lexicons),
        eval_only: false,
        excluded: false,
        stratum: None,
    }
}

/// Rank-based bin for each value: `floor(bins * rank / n)`, ties by position.
fn rank_bins(values: &[usize], bins: usize) -> Vec<usize> {
    let n = values.len();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by_key(|&i| (values[i], i));
    let mut out = vec![0; n];
    for (rank, i) in order.into_iter().enumerate() {
        out[i] = bins * rank / n.max(1);
    }
    out
}

/// Labels every pair and balances classes within strata of (length bin,
/// version, edit-count bin) by seeded down-sampling of the larger class.
/// Strata holding one class only are kept but flagged `excluded`.
pub fn build_newsedits_dataset(
    inputs: &[NewsEditsInput],
    lexicons: &Lexicons,
    cfg: &NewsEditsConfig,
    exec: Execution,
) -> ProbeOutput {
    let mut examples = parallel::map(inputs, exec, |i| build_newsedits_example(i, lexicons, cfg.with_sa));
    let lengths: Vec<usize> = inputs.iter().map(|i| i.doc_t.len()).collect();
    let edits: Vec<usize> = inputs.iter().map(|i| i.pair.edit_counts.total()).collect();
    let len_bin = rank_bins(&lengths, cfg.length_bins.max(1));
    let edit_bin = rank_bins(&edits, cfg.edit_bins.max(1));

    let mut strata: BTreeMap<String, Vec<usize>> = BTreeMap::new();
    for (k, ex) in examples.iter_mut().enumerate() {
        let key = format!("len{}/v{}/edit{}", len_bin[k], ex.version_id, edit_bin[k]);
        ex.stratum = Some(key.clone());
        strata.entry(key).or_default().push(k);
    }
    let mut out = ProbeOutput::default();
    if cfg.unbalanced {
        out.examples = examples;
        return out;
    }
    let mut keep = vec![false; examples.len()];
    for (key, members) in &strata {
        let (pos, neg): (Vec<usize>, Vec<usize>) = members.iter().partition(|&&k| examples[k].label == 1);
        if pos.is_empty() || neg.is_empty() {
            out.warnings.push(format!(
                "stratum {key} holds a single class ({} examples); excluded from the balanced set",
                members.len()
            ));
            for &k in members {
                examples[k].excluded = true;
                keep[k] = true;
            }
            continue;
        }
        let m = pos.len().min(neg.len());
        let mut rng = doc_rng(cfg.seed, key, 0, "newsedits-balance");
        for class in [&pos, &neg] {
            for k in index::sample(&mut rng, class.len(), m) {
                keep[class[k]] = true;
            }
        }
    }
    out.examples = examples.into_iter().zip(keep).filter(|(_, k)| *k).map(|(e, _)| e).collect();
    out
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WelchTest {
    pub t: f64,
    pub df: f64,
    pub p: f64,
}

fn mean_var(xs: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, var)
}

/// Two-sided Welch t-test; `None` when either sample has fewer than two values.
pub fn welch_t_test(a: &[f64], b: &[f64]) -> Option<WelchTest> {
    if a.len() < 2 || b.len() < 2 {
        return None;
    }
    let (ma, va) = mean_var(a);
    let (mb, vb) = mean_var(b);
    let (na, nb) = (a.len() as f64, b.len() as f64);
    let se2 = va / na + vb / nb;
    if se2 == 0.0 {
        let (t, p) = if ma == mb { (0.0, 1.0) } else { ((ma - mb).signum() * f64::INFINITY, 0.0) };
        return Some(WelchTest {
            t,
            df: na + nb - 2.0,
            p,
        });
    }
    let t = (ma - mb) / se2.sqrt();
    let df = se2 * se2 / ((va / na).powi(2) / (na - 1.0) + (vb / nb).powi(2) / (nb - 1.0));
    let dist = StudentsT::new(0.0, 1.0, df).ok()?;
    let p = (2.0 * dist.cdf(-t.abs())).clamp(0.0, 1.0);
    Some(WelchTest { t, df, p })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureComparison {
    pub feature: String,
    pub n: [usize; 2],
    pub mean: [f64; 2],
    pub sd: [f64; 2],
    pub test: Option<WelchTest>,
    pub significant: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConfoundReport {
    pub alpha: f64,
    /// Indexed by class: position 0 is `y = 0`.
    pub features: Vec<FeatureComparison>,
    pub flagged: Vec<String>,
}

pub const CONFOUND_ALPHA: f64 = 0.01;

/// Compares stored lexical counts between the two classes. Examples marked
/// `excluded` are ignored.
pub fn audit_confounds(examples: &[ProbeExample]) -> ConfoundReport {
    let mut by_class: [Vec<[f64; 5]>; 2] = [Vec::new(), Vec::new()];
    for e in examples.iter().filter(|e| !e.excluded) {
        by_class[(e.label == 1) as usize].push(e.features.values());
    }
    let mut features = Vec::new();
    let mut flagged = Vec::new();
    for (f, name) in ProbeFeatures::NAMES.iter().enumerate() {
        let cols: [Vec<f64>; 2] = [
            by_class[0].iter().map(|v| v[f]).collect(),
            by_class[1].iter().map(|v| v[f]).collect(),
        ];
        let stat = |xs: &[f64]| match xs.len() {
            0 => (0.0, 0.0),
            1 => (xs[0], 0.0),
            _ => {
                let (m, v) = mean_var(xs);
                (m, v.sqrt())
            }
        };
        let (m0, s0) = stat(&cols[0]);
        let (m1, s1) = stat(&cols[1]);
        let test = welch_t_test(&cols[0], &cols[1]);
        let significant = test.is_some_and(|t| t.p < CONFOUND_ALPHA);
        if significant {
            flagged.push((*name).to_owned());
        }
        features.push(FeatureComparison {
            feature: (*name).to_owned(),
            n: [cols[0].len(), cols[1].len()],
            mean: [m0, m1],
            sd: [s0, s1],
            test,
            significant,
        });
    }
    ConfoundReport {
        alpha: CONFOUND_ALPHA,
        features,
        flagged,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{InformationChannel, Source};
    use approx::assert_abs_diff_eq;

    fn attr_with(counts: &[usize], n: usize) -> DocumentAttribution {
        let mut map = AttributionMap::new();
        let mut s = 0;
        let mut sources = Vec::new();
        for (q, &c) in counts.iter().enumerate() {
            sources.push(Source {
                source_id: q,
                canonical_name: format!("source {q}"),
                mentions: vec![],
                is_passive: false,
            });
            for _ in 0..c {
                map.insert(s, q, InformationChannel::Quote);
                s += 1;
            }
        }
        assert!(s <= n);
        DocumentAttribution {
            doc_id: "d".into(),
            version_id: 0,
            sources,
            map,
        }
    }

    #[test]
    fn top_is_argmax_with_first_mention_ties() {
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let a = attr_with(&[1, 5, 2], 10);
        assert_eq!(select_source(&a, 10, Difficulty::Top, SecondRule::Top3, &mut rng), Some(1));
        let tie = attr_with(&[3, 3], 10);
        assert_eq!(select_source(&tie, 10, Difficulty::Top, SecondRule::Top3, &mut rng), Some(0));
        assert_eq!(select_source(&attr_with(&[], 3), 3, Difficulty::Any, SecondRule::Top3, &mut rng), None);
    }

    #[test]
    fn share10_rule() {
        let a = attr_with(&[5, 2, 1, 1], 20);
        for seed in 0..50 {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let q = select_source(&a, 20, Difficulty::Second, SecondRule::Share10, &mut rng).unwrap();
            assert!(q == 0 || q == 1 || q == 2 || q == 3);
            // 1 of 20 sentences is not more than 10%.
            assert!(q < 2);
        }
    }

    #[test]
    fn welch_cases() {
        let same = [1.0, 2.0, 3.0, 4.0];
        let r = welch_t_test(&same, &same).unwrap();
        assert_eq!((r.t, r.p), (0.0, 1.0));
        let r = welch_t_test(&[5.0, 5.0], &[5.0, 5.0]).unwrap();
        assert_eq!(r.p, 1.0);
        let r = welch_t_test(&[1.0, 1.0], &[2.0, 2.0]).unwrap();
        assert_eq!(r.p, 0.0);
        assert!(welch_t_test(&[1.0], &[1.0, 2.0]).is_none());
    }

    #[test]
    fn welch_matches_reference_values() {
        // scipy.stats.ttest_ind(a, b, equal_var=False)
        let a = [19.0, 22.0, 16.0, 29.0, 24.0];
        let b = [20.0, 11.0, 17.0, 12.0];
        let r = welch_t_test(&a, &b).unwrap();
        assert_abs_diff_eq!(r.t, 2.283148255687048, epsilon = 1e-9);
        assert_abs_diff_eq!(r.df, 6.928837482846501, epsilon = 1e-9);
        assert_abs_diff_eq!(r.p, 0.05675092592187574, epsilon = 1e-9);
    }

    #[test]
    fn sa_round_trip_simple() {
        let text = "A b. SOURCE: x, y. C d? SOURCE: None. E. SOURCE: z.";
        let parsed = parse_sa(text);
        assert_eq!(parsed.len(), 3);
        assert_eq!(parsed[0], ("A b.".into(), vec!["x".into(), "y".into()]));
        assert_eq!(parsed[1], ("C d?".into(), vec![]));
        assert_eq!(parsed[2], ("E.".into(), vec!["z".into()]));
    }

    #[test]
    fn added_sources_use_resolution() {
        let names = |ns: &[&str]| {
            let mut a = DocumentAttribution {
                doc_id: "d".into(),
                version_id: 0,
                sources: vec![],
                map: AttributionMap::new(),
            };
            for (i, n) in ns.iter().enumerate() {
                a.sources.push(Source {
                    source_id: i,
                    canonical_name: (*n).into(),
                    mentions: vec![],
                    is_passive: false,
                });
                a.map.insert(i, i, InformationChannel::Quote);
            }
            a
        };
        let t = names(&["Laurent Lamothe"]);
        assert_eq!(count_added_sources(&t, &t), 0);
        assert_eq!(count_added_sources(&t, &names(&["Lamothe", "commission", "protesters"])), 2);
        assert_eq!(count_added_sources(&t, &names(&["Lamothe"])), 0);
    }

    #[test]
    fn rank_bins_are_even() {
        let bins = rank_bins(&[5, 1, 3, 3, 9, 0], 3);
        assert_eq!(bins, vec![2, 0, 1, 1, 2, 0]);
    }
}
