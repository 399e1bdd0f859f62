//! Corpus sourcing statistics: per-document summaries, their corpus means,
//! and the curves behind the usual plots (sourcing by position, by length, by
//! version).
//!
//! Distributions over sources count sentence-source assignments, so a
//! sentence attributed to two sources contributes to both.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::model::{AttributionMap, Document, DocumentAttribution};
use crate::parallel::{self, Execution};

/// Shannon entropy in nats of a distribution given by counts. Zero for an
/// empty or single-outcome distribution.
pub fn entropy_of_counts(counts: &[usize]) -> f64 {
    let total: usize = counts.iter().sum();
    if total == 0 {
        return 0.0;
    }
    let total = total as f64;
    counts
        .iter()
        .filter(|&&c| c > 0)
        .map(|&c| {
            let p = c as f64 / total;
            -p * p.ln()
        })
        .sum::<f64>()
        .max(0.0)
}

/// Entropy of the per-source assignment distribution of one document.
pub fn source_entropy(map: &AttributionMap) -> f64 {
    let counts: Vec<usize> = map.sentence_counts().into_values().collect();
    entropy_of_counts(&counts)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DocStats {
    pub doc_id: String,
    pub version_id: u32,
    pub n_sentences: usize,
    pub doc_len_chars: usize,
    pub n_sources: usize,
    pub pct_sents_sourced: f64,
    pub pct_source_sents_top: f64,
    pub pct_source_sents_bottom: f64,
    pub source_entropy: f64,
    /// Nothing is attributed; top, bottom and entropy are reported as 0.
    pub no_sources: bool,
}

pub fn doc_stats(doc: &Document, attr: &DocumentAttribution) -> Result<DocStats> {
    let detected = attr.map.derive_detection(doc.len())?;
    let n_sourced = detected.iter().filter(|d| **d).count();
    let counts = attr.map.sentence_counts();
    let assignments: usize = counts.values().sum();
    let share = |c: usize| 100.0 * c as f64 / assignments as f64;
    let (top, bottom) = if assignments == 0 {
        (0.0, 0.0)
    } else {
        (
            share(counts.values().copied().max().unwrap_or(0)),
            share(counts.values().copied().min().unwrap_or(0)),
        )
    };
    let pct = |a: usize, b: usize| if b == 0 { 0.0 } else { 100.0 * a as f64 / b as f64 };
    Ok(DocStats {
        doc_id: doc.doc_id.clone(),
        version_id: doc.version_id,
        n_sentences: doc.len(),
        doc_len_chars: doc.article_text().chars().count(),
        n_sources: counts.len(),
        pct_sents_sourced: pct(n_sourced, doc.len()),
        pct_source_sents_top: top,
        pct_source_sents_bottom: bottom,
        source_entropy: source_entropy(&attr.map),
        no_sources: counts.is_empty(),
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CurvePoint {
    /// Sentence index, percentile bin, version id or length bin.
    pub key: usize,
    pub n: usize,
    pub n_sourced: usize,
    pub value: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PositionCurve {
    /// value = fraction of documents longer than `key` whose sentence `key` is sourced.
    pub by_index: Vec<CurvePoint>,
    /// Bin `floor(100 i / n)`; value = fraction of sentences in the bin that are sourced.
    pub by_percentile: Vec<CurvePoint>,
}

impl PositionCurve {
    /// Percentile bin with the highest sourcing rate; ties go to the earliest.
    pub fn most_sourced_percentile(&self) -> Option<usize> {
        let mut best: Option<&CurvePoint> = None;
        for p in self.by_percentile.iter().filter(|p| p.n > 0) {
            if best.is_none_or(|b| p.value > b.value) {
                best = Some(p);
            }
        }
        best.map(|p| p.key)
    }
}

fn finish_points(raw: BTreeMap<usize, (usize, usize)>) -> Vec<CurvePoint> {
    raw.into_iter()
        .map(|(key, (n, n_sourced))| CurvePoint {
            key,
            n,
            n_sourced,
            value: if n == 0 { 0.0 } else { n_sourced as f64 / n as f64 },
        })
        .collect()
}

pub fn position_curve(detections: &[Vec<bool>]) -> PositionCurve {
    let mut by_index: BTreeMap<usize, (usize, usize)> = BTreeMap::new();
    let mut by_pct: BTreeMap<usize, (usize, usize)> = (0..100).map(|b| (b, (0, 0))).collect();
    for det in detections {
        let n = det.len();
        for (i, &d) in det.iter().enumerate() {
            let e = by_index.entry(i).or_default();
            e.0 += 1;
            e.1 += d as usize;
            let e = by_pct.entry(100 * i / n).or_default();
            e.0 += 1;
            e.1 += d as usize;
        }
    }
    PositionCurve {
        by_index: finish_points(by_index),
        by_percentile: finish_points(by_pct),
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VersionCurve {
    /// value = mean number of sources among documents at that version id.
    pub points: Vec<CurvePoint>,
    /// Mean change in source count between consecutive versions of a document.
    pub delta: Option<f64>,
    /// Document ids seen in only one version.
    pub skipped_single_version: usize,
}

/// `items` are `(doc_id, version_id, n_sources)` triples in any order.
pub fn version_curve(items: &[(String, u32, usize)]) -> VersionCurve {
    let mut per_version: BTreeMap<usize, (usize, usize)> = BTreeMap::new();
    let mut lineage: BTreeMap<&str, BTreeMap<u32, usize>> = BTreeMap::new();
    for (doc_id, version, n) in items {
        let e = per_version.entry(*version as usize).or_default();
        e.0 += 1;
        e.1 += n;
        lineage.entry(doc_id).or_default().insert(*version, *n);
    }
    let mut steps = Vec::new();
    let mut skipped = 0;
    for versions in lineage.values() {
        if versions.len() < 2 {
            skipped += 1;
            continue;
        }
        let counts: Vec<usize> = versions.values().copied().collect();
        steps.extend(counts.windows(2).map(|w| w[1] as f64 - w[0] as f64));
    }
    VersionCurve {
        points: finish_points(per_version),
        delta: (!steps.is_empty()).then(|| steps.iter().sum::<f64>() / steps.len() as f64),
        skipped_single_version: skipped,
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Histogram {
    /// Lower edge of every bin.
    pub edges: Vec<f64>,
    pub counts: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CorpusStats {
    pub n_docs: usize,
    pub mean_n_sentences: f64,
    pub mean_doc_len_chars: f64,
    pub mean_n_sources: f64,
    pub mean_pct_sents_sourced: f64,
    pub mean_pct_source_sents_top: f64,
    pub mean_pct_source_sents_bottom: f64,
    pub mean_source_entropy: f64,
    /// Documents with nothing attributed.
    pub n_docs_without_sources: usize,
    pub delta_sources_per_version: Option<f64>,
    pub most_sourced_position_percentile: Option<usize>,
    /// Fraction of sentences sourced, ten bins of width 0.1 (the last includes 1.0).
    pub sourcing_fraction: Histogram,
    pub sources_by_version: VersionCurve,
    /// Mean percentage sourced by document length in bins of ten sentences.
    pub sourcing_by_length: Vec<CurvePoint>,
    pub sourcing_by_position: PositionCurve,
}

/// Per-document stats and the corpus summary, computed in parallel per document.
pub fn corpus_stats(pairs: &[(&Document, &DocumentAttribution)], exec: Execution) -> Result<(Vec<DocStats>, CorpusStats)> {
    let per_doc = parallel::map(pairs, exec, |(d, a)| {
        let stats = doc_stats(d, a)?;
        let det = a.map.derive_detection(d.len())?;
        Ok::<_, crate::Error>((stats, det))
    });
    let mut docs = Vec::with_capacity(pairs.len());
    let mut detections = Vec::with_capacity(pairs.len());
    for r in per_doc {
        let (s, d) = r?;
        docs.push(s);
        detections.push(d);
    }
    let n = docs.len();
    let mean = |f: fn(&DocStats) -> f64| if n == 0 { 0.0 } else { docs.iter().map(f).sum::<f64>() / n as f64 };

    let mut frac_counts = vec![0; 10];
    for s in &docs {
        let bin = ((s.pct_sents_sourced / 10.0).floor() as usize).min(9);
        frac_counts[bin] += 1;
    }
    let mut by_len: BTreeMap<usize, (usize, f64)> = BTreeMap::new();
    for s in &docs {
        let e = by_len.entry(s.n_sentences / 10 * 10).or_default();
        e.0 += 1;
        e.1 += s.pct_sents_sourced;
    }
    let sourcing_by_length = by_len
        .into_iter()
        .map(|(key, (count, total))| CurvePoint {
            key,
            n: count,
            n_sourced: 0,
            value: total / count as f64,
        })
        .collect();
    let versions: Vec<(String, u32, usize)> =
        docs.iter().map(|s| (s.doc_id.clone(), s.version_id, s.n_sources)).collect();
    let sources_by_version = version_curve(&versions);
    let sourcing_by_position = position_curve(&detections);

    let summary = CorpusStats {
        n_docs: n,
        mean_n_sentences: mean(|s| s.n_sentences as f64),
        mean_doc_len_chars: mean(|s| s.doc_len_chars as f64),
        mean_n_sources: mean(|s| s.n_sources as f64),
        mean_pct_sents_sourced: mean(|s| s.pct_sents_sourced),
        mean_pct_source_sents_top: mean(|s| s.pct_source_sents_top),
        mean_pct_source_sents_bottom: mean(|s| s.pct_source_sents_bottom),
        mean_source_entropy: mean(|s| s.source_entropy),
        n_docs_without_sources: docs.iter().filter(|s| s.no_sources).count(),
        delta_sources_per_version: sources_by_version.delta,
        most_sourced_position_percentile: sourcing_by_position.most_sourced_percentile(),
        sourcing_fraction: Histogram {
            edges: (0..10).map(|b| b as f64 / 10.0).collect(),
            counts: frac_counts,
        },
        sources_by_version,
        sourcing_by_length,
        sourcing_by_position,
    };
    Ok((docs, summary))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::InformationChannel;
    use approx::assert_abs_diff_eq;

    fn map_with(counts: &[usize]) -> AttributionMap {
        let mut m = AttributionMap::new();
        let mut sentence = 0;
        for (q, &c) in counts.iter().enumerate() {
            for _ in 0..c {
                m.insert(sentence, q, InformationChannel::Quote);
                sentence += 1;
            }
        }
        m
    }

    #[test]
    fn entropy_examples() {
        assert_eq!(source_entropy(&map_with(&[7])), 0.0);
        assert_abs_diff_eq!(source_entropy(&map_with(&[4, 4])), 2f64.ln(), epsilon = 1e-12);
        let expected = -(0.5f64 * 0.5f64.ln() + 0.3 * 0.3f64.ln() + 0.2 * 0.2f64.ln());
        assert_abs_diff_eq!(source_entropy(&map_with(&[5, 3, 2])), expected, epsilon = 1e-12);
        assert_abs_diff_eq!(source_entropy(&map_with(&[5, 3, 2])), 1.0297, epsilon = 1e-4);
        assert_eq!(source_entropy(&AttributionMap::new()), 0.0);
    }

    #[test]
    fn position_curve_first_sentence_only() {
        let dets = vec![vec![true, false, false], vec![true, false]];
        let c = position_curve(&dets);
        let values: Vec<f64> = c.by_index.iter().map(|p| p.value).collect();
        assert_eq!(values, vec![1.0, 0.0, 0.0]);
        assert_eq!(c.by_index[2].n, 1);
        assert_eq!(c.most_sourced_percentile(), Some(0));
    }

    #[test]
    fn version_delta() {
        let v = version_curve(&[("a".into(), 0, 3), ("a".into(), 1, 5), ("b".into(), 0, 1)]);
        assert_eq!(v.delta, Some(2.0));
        assert_eq!(v.skipped_single_version, 1);
        assert_eq!(v.points.len(), 2);
        let single = version_curve(&[("a".into(), 0, 3), ("b".into(), 0, 2)]);
        assert_eq!(single.points.len(), 1);
        assert_eq!(single.delta, None);
    }
}
