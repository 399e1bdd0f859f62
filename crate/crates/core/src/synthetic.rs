//! Seeded generator for annotated toy corpora.
//!
//! Documents are built from a handful of templates (named-speaker reports,
//! quotes, signifier reports, passive constructions, unsourced statements)
//! with full token, dependency and entity annotation, so every backend runs on
//! them. Each document depends only on the seed and its id.

use rand::seq::IndexedRandom;
use rand::Rng;
use rand_chacha::ChaCha8Rng;

use crate::model::{Document, DocumentAttribution, GoldLabel, InformationChannel, Sentence, Token, PASSIVE_MARKER};
use crate::neural::{Prediction, NULL_ANSWER};
use crate::probes::{doc_rng, EditCounts, VersionPair};

const FIRST: &[&str] = &[
    "Maria", "James", "Amina", "Chen", "Lucia", "Omar", "Grace", "Ivan", "Priya", "Kofi", "Elena", "Tomas",
];
const LAST: &[&str] = &[
    "Alvarez", "Okafor", "Lindqvist", "Nakamura", "Haddad", "Moreau", "Kowalski", "Mensah", "Ricci", "Brennan",
    "Duarte", "Sato",
];
const SIGNIFIERS: &[&str] = &["police", "ministry", "commission", "agency", "committee", "court", "department"];
const CITIES: &[&str] = &["Lisbon", "Nairobi", "Denver", "Osaka", "Quito", "Tallinn"];
const NOUNS: &[&str] = &["council", "union", "board", "company", "government", "court", "school"];
const OBJECTS: &[&str] = &["budget", "plan", "contract", "policy", "schedule", "proposal", "report"];
const VERBS: &[&str] = &["review", "delay", "approve", "reject", "expand", "revise"];
const SPEECH: &[(&str, &str)] = &[("said", "say"), ("added", "add"), ("warned", "warn"), ("argued", "argue")];
const REPORTS: &[(&str, &str)] = &[("announced", "announce"), ("reported", "report"), ("stated", "state")];
const PASSIVES: &[(&str, &str, &str, &str)] = &[
    ("Curfews", "curfew", "imposed", "impose"),
    ("Roads", "road", "closed", "close"),
    ("Flights", "flight", "cancelled", "cancel"),
    ("Schools", "school", "shut", "shut"),
];

#[derive(Debug, Clone, PartialEq)]
pub struct SyntheticConfig {
    pub seed: u64,
    pub n_docs: usize,
    pub min_sentences: usize,
    pub max_sentences: usize,
    /// Probability that a sentence is sourced.
    pub sourced_fraction: f64,
    /// Versions per article; consecutive versions form version pairs.
    pub versions: u32,
}

impl Default for SyntheticConfig {
    fn default() -> Self {
        Self {
            seed: 7,
            n_docs: 100,
            min_sentences: 8,
            max_sentences: 30,
            sourced_fraction: 0.5,
            versions: 1,
        }
    }
}

#[derive(Debug, Clone, Default)]
pub struct SyntheticCorpus {
    /// Every version of every article, grouped by article.
    pub documents: Vec<Document>,
    pub version_pairs: Vec<VersionPair>,
}

struct Builder {
    text: String,
    tokens: Vec<Token>,
    attach: bool,
}

impl Builder {
    fn new() -> Self {
        Self {
            text: String::new(),
            tokens: Vec::new(),
            attach: true,
        }
    }

    /// Appends a token; `head` is 0-based, `None` for the root.
    fn push(&mut self, form: &str, lemma: &str, upos: &str, head: Option<usize>, deprel: &str, tag: &str) -> usize {
        let glue = matches!(form, "," | ".") || (form == "\"" && self.open_quote());
        if !self.attach && !glue {
            self.text.push(' ');
        }
        let start = self.text.len();
        self.text.push_str(form);
        self.attach = form == "\"" && !glue;
        let index = self.tokens.len();
        self.tokens.push(Token {
            index,
            form: form.to_owned(),
            lemma: lemma.to_owned(),
            upos: upos.to_owned(),
            head,
            deprel: deprel.to_owned(),
            entity_tag: tag.to_owned(),
            char_start: start,
            char_end: self.text.len(),
        });
        index
    }

    fn open_quote(&self) -> bool {
        self.tokens.iter().filter(|t| t.form == "\"").count() % 2 == 1
    }

    fn finish(self, gold: GoldLabel) -> Sentence {
        Sentence {
            index: 0,
            text: self.text,
            tokens: self.tokens,
            gold: Some(gold),
        }
    }
}

struct Person {
    first: &'static str,
    last: &'static str,
}

impl Person {
    fn name(&self) -> String {
        format!("{} {}", self.first, self.last)
    }
}

/// `the NOUN will VERB the OBJECT` hanging off `head`.
fn clause(b: &mut Builder, rng: &mut ChaCha8Rng, head: Option<usize>, rel: &str) {
    let noun = *NOUNS.choose(rng).unwrap();
    let obj = *OBJECTS.choose(rng).unwrap();
    let verb = *VERBS.choose(rng).unwrap();
    let base = b.tokens.len();
    b.push("the", "the", "DET", Some(base + 1), "det", "O");
    b.push(noun, noun, "NOUN", Some(base + 3), "nsubj", "O");
    b.push("will", "will", "AUX", Some(base + 3), "aux", "O");
    b.push(verb, verb, "VERB", head, rel, "O");
    b.push("the", "the", "DET", Some(base + 5), "det", "O");
    b.push(obj, obj, "NOUN", Some(base + 3), "obj", "O");
}

fn sourced(names: Vec<String>, channel: InformationChannel) -> GoldLabel {
    GoldLabel {
        is_sourced: true,
        source_names: names,
        channel,
    }
}

fn reported_speech(rng: &mut ChaCha8Rng, p: &Person) -> Sentence {
    let (form, lemma) = *SPEECH.choose(rng).unwrap();
    let mut b = Builder::new();
    b.push(p.first, p.first, "PROPN", Some(1), "compound", "B-PERSON");
    b.push(p.last, p.last, "PROPN", Some(2), "nsubj", "I-PERSON");
    b.push(form, lemma, "VERB", None, "root", "O");
    b.push("that", "that", "SCONJ", Some(7), "mark", "O");
    clause(&mut b, rng, Some(2), "ccomp");
    b.push(".", ".", "PUNCT", Some(2), "punct", "O");
    let channel = *[InformationChannel::Quote, InformationChannel::Statement, InformationChannel::PublicSpeech]
        .choose(rng)
        .unwrap();
    b.finish(sourced(vec![p.name()], channel))
}

fn direct_quote(rng: &mut ChaCha8Rng, p: &Person) -> Sentence {
    let (form, lemma) = *SPEECH.choose(rng).unwrap();
    let mut b = Builder::new();
    // `" the NOUN will VERB the OBJ , " First Last said .`
    b.push("\"", "\"", "PUNCT", Some(4), "punct", "O");
    clause(&mut b, rng, Some(11), "ccomp");
    b.push(",", ",", "PUNCT", Some(4), "punct", "O");
    b.push("\"", "\"", "PUNCT", Some(4), "punct", "O");
    b.push(p.first, p.first, "PROPN", Some(10), "compound", "B-PERSON");
    b.push(p.last, p.last, "PROPN", Some(11), "nsubj", "I-PERSON");
    b.push(form, lemma, "VERB", None, "root", "O");
    b.push(".", ".", "PUNCT", Some(11), "punct", "O");
    b.finish(sourced(vec![p.name()], InformationChannel::Quote))
}

fn signifier_report(rng: &mut ChaCha8Rng, signifier: &str) -> Sentence {
    let (form, lemma) = *REPORTS.choose(rng).unwrap();
    let mut b = Builder::new();
    b.push("The", "the", "DET", Some(1), "det", "O");
    b.push(signifier, signifier, "NOUN", Some(2), "nsubj", "O");
    b.push(form, lemma, "VERB", None, "root", "O");
    b.push("that", "that", "SCONJ", Some(7), "mark", "O");
    clause(&mut b, rng, Some(2), "ccomp");
    b.push(".", ".", "PUNCT", Some(2), "punct", "O");
    let channel = *[InformationChannel::Statement, InformationChannel::PressReport, InformationChannel::PublishedWork]
        .choose(rng)
        .unwrap();
    b.finish(sourced(vec![signifier.to_owned()], channel))
}

fn passive(rng: &mut ChaCha8Rng) -> Sentence {
    let (noun, noun_lemma, verb, verb_lemma) = *PASSIVES.choose(rng).unwrap();
    let city = *CITIES.choose(rng).unwrap();
    let mut b = Builder::new();
    b.push(noun, noun_lemma, "NOUN", Some(2), "nsubj:pass", "O");
    b.push("were", "be", "AUX", Some(2), "aux:pass", "O");
    b.push(verb, verb_lemma, "VERB", None, "root", "O");
    b.push("in", "in", "ADP", Some(4), "case", "O");
    b.push(city, city, "PROPN", Some(2), "obl", "B-GPE");
    b.push(".", ".", "PUNCT", Some(2), "punct", "O");
    b.finish(sourced(vec![PASSIVE_MARKER.to_owned()], InformationChannel::ProposalOrderLaw))
}

fn unsourced(rng: &mut ChaCha8Rng) -> Sentence {
    let city = *CITIES.choose(rng).unwrap();
    let mut b = Builder::new();
    b.push("In", "in", "ADP", Some(1), "case", "O");
    b.push(city, city, "PROPN", Some(6), "obl", "B-GPE");
    b.push(",", ",", "PUNCT", Some(6), "punct", "O");
    clause(&mut b, rng, None, "root");
    b.push(".", ".", "PUNCT", Some(6), "punct", "O");
    b.finish(GoldLabel::unsourced())
}

struct Cast {
    people: Vec<Person>,
    signifiers: Vec<&'static str>,
}

impl Cast {
    fn draw(rng: &mut ChaCha8Rng) -> Self {
        let n_people = rng.random_range(1..=4);
        let mut people: Vec<Person> = Vec::new();
        while people.len() < n_people {
            let last = *LAST.choose(rng).unwrap();
            if people.iter().all(|p| p.last != last) {
                people.push(Person {
                    first: FIRST.choose(rng).unwrap(),
                    last,
                });
            }
        }
        let n_sig = rng.random_range(0..=2);
        let signifiers = rand::seq::index::sample(rng, SIGNIFIERS.len(), n_sig)
            .into_iter()
            .map(|i| SIGNIFIERS[i])
            .collect();
        Self { people, signifiers }
    }

    /// A later version may bring in someone new.
    fn recruit(&mut self, rng: &mut ChaCha8Rng) {
        let free: Vec<&&str> = LAST.iter().filter(|l| self.people.iter().all(|p| p.last != **l)).collect();
        if let Some(last) = free.choose(rng) {
            self.people.push(Person {
                first: FIRST.choose(rng).unwrap(),
                last,
            });
        }
    }
}

fn sentence(rng: &mut ChaCha8Rng, cast: &Cast, sourced_fraction: f64) -> Sentence {
    if !rng.random_bool(sourced_fraction.clamp(0.0, 1.0)) {
        return unsourced(rng);
    }
    let roll: f64 = rng.random();
    if roll < 0.08 {
        return passive(rng);
    }
    if roll < 0.28 && !cast.signifiers.is_empty() {
        let signifier = *cast.signifiers.choose(rng).unwrap();
        return signifier_report(rng, signifier);
    }
    let p = cast.people.choose(rng).unwrap();
    if roll < 0.6 {
        direct_quote(rng, p)
    } else {
        reported_speech(rng, p)
    }
}

fn renumber(mut sentences: Vec<Sentence>) -> Vec<Sentence> {
    for (i, s) in sentences.iter_mut().enumerate() {
        s.index = i;
    }
    sentences
}

pub fn generate(cfg: &SyntheticConfig) -> SyntheticCorpus {
    let mut out = SyntheticCorpus::default();
    let versions = cfg.versions.max(1);
    let (lo, hi) = (cfg.min_sentences.max(1), cfg.max_sentences.max(cfg.min_sentences.max(1)));
    for d in 0..cfg.n_docs {
        let doc_id = format!("syn-{d:05}");
        let mut rng = doc_rng(cfg.seed, &doc_id, 0, "synthetic");
        let mut cast = Cast::draw(&mut rng);
        let n = rng.random_range(lo..=hi);
        let mut sentences: Vec<Sentence> = (0..n).map(|_| sentence(&mut rng, &cast, cfg.sourced_fraction)).collect();
        for v in 0..versions {
            if v > 0 {
                let added = rng.random_range(1..=4);
                for _ in 0..rng.random_range(0..=2) {
                    cast.recruit(&mut rng);
                }
                // New material goes in just after the lede.
                let at = 1.min(sentences.len());
                let fresh: Vec<Sentence> = (0..added).map(|_| sentence(&mut rng, &cast, 0.8)).collect();
                sentences.splice(at..at, fresh);
                out.version_pairs.push(VersionPair {
                    doc_id: doc_id.clone(),
                    version_t: v - 1,
                    version_t_plus_1: v,
                    edit_counts: EditCounts {
                        added,
                        deleted: 0,
                        edited: 0,
                    },
                });
            }
            out.documents.push(Document {
                doc_id: doc_id.clone(),
                version_id: v,
                outlet: Some("synthetic".into()),
                topic: None,
                sentences: renumber(sentences.clone()),
            });
        }
    }
    out
}

/// Model-style predictions derived from gold with controlled noise: with
/// probability `noise` the detector flips and the retrieved name is replaced
/// by another source of the document (or the null answer).
pub fn noisy_predictions(doc: &Document, gold: &DocumentAttribution, noise: f64, seed: u64) -> Vec<Prediction> {
    let mut rng = doc_rng(seed, &doc.doc_id, doc.version_id, "predictions");
    let names: Vec<&str> = gold.sources.iter().filter(|s| !s.is_passive).map(|s| s.canonical_name.as_str()).collect();
    (0..doc.len())
        .map(|i| {
            let truth = gold.map.is_attributed(i);
            let flip = rng.random_bool(noise.clamp(0.0, 1.0));
            let detected = truth != flip;
            let score = if detected {
                rng.random_range(0.55..1.0)
            } else {
                rng.random_range(0.0..0.45)
            };
            let retrieved = if !detected {
                None
            } else if !flip && truth {
                let named = gold.names_of(i).into_iter().find(|n| names.contains(n));
                Some(named.unwrap_or(NULL_ANSWER).to_owned())
            } else {
                Some(names.choose(&mut rng).copied().unwrap_or(NULL_ANSWER).to_owned())
            };
            Prediction {
                doc_id: doc.doc_id.clone(),
                sentence_index: i,
                detector_score: Some((score * 1e6_f64).round() / 1e6),
                retrieved_source: retrieved,
            }
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn documents_validate_and_are_deterministic() {
        let cfg = SyntheticConfig {
            n_docs: 20,
            versions: 3,
            ..Default::default()
        };
        let a = generate(&cfg);
        let b = generate(&cfg);
        assert_eq!(a.documents, b.documents);
        assert_eq!(a.documents.len(), 60);
        assert_eq!(a.version_pairs.len(), 40);
        for d in &a.documents {
            d.validate().unwrap();
            DocumentAttribution::from_gold(d).validate(d).unwrap();
        }
    }

    #[test]
    fn quote_template_renders_cleanly() {
        let mut rng = doc_rng(1, "x", 0, "t");
        let s = direct_quote(&mut rng, &Person { first: "Ana", last: "Sol" });
        assert!(s.text.starts_with("\"the "), "{}", s.text);
        assert!(s.text.contains(",\" Ana Sol "), "{}", s.text);
        assert!(s.has_quoted_span());
    }
}
