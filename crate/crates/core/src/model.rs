//! Documents, sources, attributions and the information-channel taxonomy.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::{Error, Result, ValidationError};
use crate::text;

pub type SourceId = usize;

/// Literal gold label used when a sentence is sourced but no source is named.
pub const PASSIVE_MARKER: &str = "passive voice";

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Token {
    pub index: usize,
    pub form: String,
    pub lemma: String,
    pub upos: String,
    /// Index of the syntactic head within the sentence; `None` for the root.
    pub head: Option<usize>,
    pub deprel: String,
    /// BIO entity label such as `B-PERSON` or `O`.
    pub entity_tag: String,
    /// UTF-8 byte offsets into the sentence text.
    pub char_start: usize,
    pub char_end: usize,
}

impl Token {
    pub fn is_pronoun(&self) -> bool {
        self.upos == "PRON"
    }

    pub fn is_verb(&self) -> bool {
        self.upos == "VERB"
    }

    /// Entity type from the BIO tag, e.g. `PERSON` for `I-PERSON`.
    pub fn entity_type(&self) -> Option<&str> {
        self.entity_tag
            .split_once('-')
            .filter(|(prefix, _)| *prefix == "B" || *prefix == "I")
            .map(|(_, t)| t)
    }

    pub fn begins_entity(&self) -> bool {
        self.entity_tag.starts_with("B-")
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Sentence {
    pub index: usize,
    pub text: String,
    pub tokens: Vec<Token>,
    pub gold: Option<GoldLabel>,
}

impl Sentence {
    pub fn has_quoted_span(&self) -> bool {
        text::has_double_quoted_span(&self.text)
    }

    /// Text covered by the half-open token span `[start, end)`.
    pub fn span_text(&self, start: usize, end: usize) -> &str {
        let from = self.tokens[start].char_start;
        let to = self.tokens[end - 1].char_end;
        &self.text[from..to]
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct GoldLabel {
    pub is_sourced: bool,
    #[serde(default)]
    pub source_names: Vec<String>,
    pub channel: InformationChannel,
}

impl GoldLabel {
    pub fn unsourced() -> Self {
        Self {
            is_sourced: false,
            source_names: Vec::new(),
            channel: InformationChannel::NoQuote,
        }
    }

    pub fn is_passive(&self) -> bool {
        self.is_sourced
            && (self.source_names.is_empty()
                || self.source_names.iter().any(|n| n.trim().eq_ignore_ascii_case(PASSIVE_MARKER)))
    }
}

macro_rules! channels {
    ($($variant:ident => $name:literal),+ $(,)?) => {
        /// How the information in a sentence reached the journalist.
        ///
        /// The sixteen annotation categories plus `NoQuote`. `DirectQuote` and
        /// `IndirectQuote` refine `Quote` by the presence of quote marks; the rule
        /// baselines emit them and corpora labelled with the coarse channel names use
        /// them. Strings that match nothing parse to `Other`.
        #[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
        pub enum InformationChannel {
            $($variant),+
        }

        impl InformationChannel {
            pub const ALL: &'static [InformationChannel] = &[$(InformationChannel::$variant),+];

            pub fn as_str(self) -> &'static str {
                match self {
                    $(InformationChannel::$variant => $name),+
                }
            }
        }
    };
}

channels! {
    NoQuote => "NO_QUOTE",
    Quote => "QUOTE",
    DirectQuote => "DIRECT_QUOTE",
    IndirectQuote => "INDIRECT_QUOTE",
    Background => "BACKGROUND",
    Narrative => "NARRATIVE",
    DirectObservation => "DIRECT_OBSERVATION",
    PublicSpeech => "PUBLIC_SPEECH",
    Communication => "COMMUNICATION",
    PublishedWork => "PUBLISHED_WORK",
    Statement => "STATEMENT",
    Lawsuit => "LAWSUIT",
    PriceSignal => "PRICE_SIGNAL",
    VotePoll => "VOTE_POLL",
    Document => "DOCUMENT",
    PressReport => "PRESS_REPORT",
    SocialMediaPost => "SOCIAL_MEDIA_POST",
    ProposalOrderLaw => "PROPOSAL_ORDER_LAW",
    DeclinedComment => "DECLINED_COMMENT",
    Other => "OTHER",
}

impl InformationChannel {
    /// Lenient parse: case-insensitive, any run of non-alphanumerics acts as `_`.
    pub fn parse(raw: &str) -> Self {
        let key = raw
            .to_uppercase()
            .split(|c: char| !c.is_alphanumeric())
            .filter(|w| !w.is_empty())
            .collect::<Vec<_>>()
            .join("_");
        if let Some(c) = Self::ALL.iter().find(|c| c.as_str() == key) {
            return *c;
        }
        match key.as_str() {
            "NONE" | "NO_SOURCE" => Self::NoQuote,
            "COURT_PROCEEDING" | "COURT" => Self::Lawsuit,
            "EMAIL" => Self::Communication,
            "SOCIAL_MEDIA" | "TWEET" => Self::SocialMediaPost,
            "PROPOSAL" | "ORDER" | "LAW" => Self::ProposalOrderLaw,
            "VOTE" | "POLL" => Self::VotePoll,
            "SPEECH" => Self::PublicSpeech,
            "REPORT" => Self::PressReport,
            "OBSERVATION" => Self::DirectObservation,
            _ => Self::Other,
        }
    }
}

impl fmt::Display for InformationChannel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for InformationChannel {
    type Err = std::convert::Infallible;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        Ok(Self::parse(s))
    }
}

impl Serialize for InformationChannel {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.serialize_str(self.as_str())
    }
}

impl<'de> Deserialize<'de> for InformationChannel {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let raw = String::deserialize(d)?;
        Ok(Self::parse(&raw))
    }
}

/// News beat assigned by an external topic classifier.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Topic {
    OtherNews,
    Disaster,
    Elections,
    Labor,
    Safety,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Document {
    pub doc_id: String,
    pub version_id: u32,
    pub outlet: Option<String>,
    pub topic: Option<Topic>,
    pub sentences: Vec<Sentence>,
}

impl Document {
    pub fn len(&self) -> usize {
        self.sentences.len()
    }

    pub fn is_empty(&self) -> bool {
        self.sentences.is_empty()
    }

    /// Sentences joined by single spaces.
    pub fn article_text(&self) -> String {
        join_sentences(self.sentences.iter().map(|s| s.text.as_str()))
    }

    pub fn has_gold(&self) -> bool {
        self.sentences.iter().any(|s| s.gold.is_some())
    }

    /// Checks every structural invariant; the first violation is returned.
    pub fn validate(&self) -> std::result::Result<(), ValidationError> {
        let err = |s: Option<usize>, m: String| Err(ValidationError::new(&self.doc_id, s, m));
        if self.sentences.is_empty() {
            return err(None, "document has no sentences".into());
        }
        for (pos, sentence) in self.sentences.iter().enumerate() {
            let at = Some(pos);
            if sentence.index != pos {
                return err(at, format!("sentence index {} at position {pos}", sentence.index));
            }
            if sentence.tokens.is_empty() {
                return err(at, "sentence has no tokens".into());
            }
            let n = sentence.tokens.len();
            let mut roots = 0;
            let mut prev_end = 0;
            for (ti, tok) in sentence.tokens.iter().enumerate() {
                if tok.index != ti {
                    return err(at, format!("token index {} at position {ti}", tok.index));
                }
                match tok.head {
                    None => roots += 1,
                    Some(h) if h == ti => return err(at, format!("token {ti} is its own head")),
                    Some(h) if h >= n => {
                        return err(at, format!("token {ti} has head {h} outside 0..{n}"))
                    }
                    Some(_) => {}
                }
                if tok.char_start >= tok.char_end {
                    return err(at, format!("token {ti} has an empty or inverted span"));
                }
                if tok.char_start < prev_end {
                    return err(at, format!("token {ti} overlaps its predecessor"));
                }
                prev_end = tok.char_end;
                match sentence.text.get(tok.char_start..tok.char_end) {
                    Some(surface) if surface == tok.form => {}
                    Some(surface) => {
                        return err(
                            at,
                            format!("token {ti} form {:?} does not match text {surface:?}", tok.form),
                        )
                    }
                    None => return err(at, format!("token {ti} offsets fall outside the text")),
                }
            }
            if roots != 1 {
                return err(at, format!("expected exactly one root, found {roots}"));
            }
            if let Some(g) = &sentence.gold {
                if !g.is_sourced && (!g.source_names.is_empty() || g.channel != InformationChannel::NoQuote) {
                    return err(at, "unsourced gold label carries sources or a channel".into());
                }
            }
        }
        Ok(())
    }
}

pub(crate) fn join_sentences<'a>(parts: impl Iterator<Item = &'a str>) -> String {
    let mut out = String::new();
    for p in parts {
        if !out.is_empty() {
            out.push(' ');
        }
        out.push_str(p);
    }
    out
}

/// A half-open token span `[start, end)` in one sentence.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct Mention {
    pub sentence: usize,
    pub start: usize,
    pub end: usize,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Source {
    pub source_id: SourceId,
    pub canonical_name: String,
    #[serde(default)]
    pub mentions: Vec<Mention>,
    #[serde(default)]
    pub is_passive: bool,
}

impl Source {
    pub fn passive(source_id: SourceId) -> Self {
        Self {
            source_id,
            canonical_name: PASSIVE_MARKER.to_owned(),
            mentions: Vec::new(),
            is_passive: true,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct Attribution {
    pub source_id: SourceId,
    pub channel: InformationChannel,
}

/// The attribution function: sentence index to the set of (source, channel) pairs.
/// Sentences without an entry are unattributed.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct AttributionMap {
    entries: BTreeMap<usize, BTreeSet<Attribution>>,
}

impl AttributionMap {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn insert(&mut self, sentence: usize, source_id: SourceId, channel: InformationChannel) {
        self.entries
            .entry(sentence)
            .or_default()
            .insert(Attribution { source_id, channel });
    }

    pub fn entries(&self) -> impl Iterator<Item = (usize, &BTreeSet<Attribution>)> {
        self.entries.iter().map(|(k, v)| (*k, v))
    }

    pub fn get(&self, sentence: usize) -> Option<&BTreeSet<Attribution>> {
        self.entries.get(&sentence)
    }

    pub fn is_attributed(&self, sentence: usize) -> bool {
        self.entries.get(&sentence).is_some_and(|s| !s.is_empty())
    }

    pub fn is_empty(&self) -> bool {
        self.entries.values().all(|s| s.is_empty())
    }

    pub fn max_sentence(&self) -> Option<usize> {
        self.entries.keys().next_back().copied()
    }

    pub fn remove_sentence(&mut self, sentence: usize) -> Option<BTreeSet<Attribution>> {
        self.entries.remove(&sentence)
    }

    /// Component-wise membership test for a source.
    pub fn attributes(&self, sentence: usize, source_id: SourceId) -> bool {
        self.entries
            .get(&sentence)
            .is_some_and(|s| s.iter().any(|a| a.source_id == source_id))
    }

    fn check_range(&self, n_sentences: usize) -> Result<()> {
        match self.max_sentence() {
            Some(max) if max >= n_sentences => Err(Error::Structure(format!(
                "attribution entry for sentence {max} in a document of {n_sentences} sentences"
            ))),
            _ => Ok(()),
        }
    }

    /// Position `i` is true iff sentence `i` has at least one source.
    pub fn derive_detection(&self, n_sentences: usize) -> Result<Vec<bool>> {
        self.check_range(n_sentences)?;
        Ok((0..n_sentences).map(|i| self.is_attributed(i)).collect())
    }

    pub fn sources_of(&self, sentence: usize, n_sentences: usize) -> Result<BTreeSet<SourceId>> {
        if sentence >= n_sentences {
            return Err(Error::Range {
                index: sentence,
                n_sentences,
            });
        }
        Ok(self
            .entries
            .get(&sentence)
            .map(|s| s.iter().map(|a| a.source_id).collect())
            .unwrap_or_default())
    }

    /// Number of sentences each source is attributed in.
    pub fn sentence_counts(&self) -> BTreeMap<SourceId, usize> {
        let mut counts = BTreeMap::new();
        for set in self.entries.values() {
            let ids: BTreeSet<SourceId> = set.iter().map(|a| a.source_id).collect();
            for id in ids {
                *counts.entry(id).or_insert(0) += 1;
            }
        }
        counts
    }
}

/// A document's source list together with its attribution map.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DocumentAttribution {
    pub doc_id: String,
    pub version_id: u32,
    /// Ordered by first mention.
    pub sources: Vec<Source>,
    pub map: AttributionMap,
}

impl DocumentAttribution {
    pub fn empty(doc: &Document) -> Self {
        Self {
            doc_id: doc.doc_id.clone(),
            version_id: doc.version_id,
            sources: Vec::new(),
            map: AttributionMap::new(),
        }
    }

    pub fn source(&self, id: SourceId) -> Option<&Source> {
        self.sources.iter().find(|s| s.source_id == id)
    }

    /// Canonical names attributed to a sentence, in source-list order.
    pub fn names_of(&self, sentence: usize) -> Vec<&str> {
        self.sources
            .iter()
            .filter(|s| self.map.attributes(sentence, s.source_id))
            .map(|s| s.canonical_name.as_str())
            .collect()
    }

    /// Drops sources that no sentence is attributed to.
    pub fn prune_unused(&mut self) {
        let used = self.map.sentence_counts();
        self.sources.retain(|s| used.contains_key(&s.source_id));
    }

    /// Sources that are attributed at least once, in list order.
    pub fn used_sources(&self) -> impl Iterator<Item = &Source> {
        let used = self.map.sentence_counts();
        self.sources.iter().filter(move |s| used.contains_key(&s.source_id))
    }

    pub fn validate(&self, doc: &Document) -> std::result::Result<(), ValidationError> {
        let err = |m: String| Err(ValidationError::new(&self.doc_id, None, m));
        if self.doc_id != doc.doc_id || self.version_id != doc.version_id {
            return err(format!(
                "attribution for {}@{} paired with document {}@{}",
                self.doc_id, self.version_id, doc.doc_id, doc.version_id
            ));
        }
        let mut ids = BTreeSet::new();
        for s in &self.sources {
            if !ids.insert(s.source_id) {
                return err(format!("duplicate source id {}", s.source_id));
            }
            if s.canonical_name.trim().is_empty() && !s.is_passive {
                return err(format!("source {} has an empty name", s.source_id));
            }
            for m in &s.mentions {
                let ok = doc
                    .sentences
                    .get(m.sentence)
                    .is_some_and(|sent| m.start < m.end && m.end <= sent.tokens.len());
                if !ok {
                    return err(format!("source {} mention {m:?} lies outside its sentence", s.source_id));
                }
            }
        }
        if let Some(max) = self.map.max_sentence() {
            if max >= doc.len() {
                return err(format!("attribution for sentence {max} beyond document end"));
            }
        }
        let counts = self.map.sentence_counts();
        if let Some(missing) = counts.keys().find(|id| !ids.contains(id)) {
            return err(format!("attribution references unknown source {missing}"));
        }
        if let Some(unused) = self.sources.iter().find(|s| !counts.contains_key(&s.source_id)) {
            return err(format!("source {} is never attributed", unused.source_id));
        }
        Ok(())
    }

    /// Builds the attribution implied by the document's gold labels.
    ///
    /// Gold names are grouped by normalized form; "passive voice" labels (or
    /// sourced sentences with no name) become a single passive source.
    pub fn from_gold(doc: &Document) -> Self {
        let mut out = Self::empty(doc);
        let mut by_key: BTreeMap<String, SourceId> = BTreeMap::new();
        let mut passive_id = None;
        for sentence in &doc.sentences {
            let Some(gold) = sentence.gold.as_ref().filter(|g| g.is_sourced) else {
                continue;
            };
            let mut named = false;
            for name in &gold.source_names {
                if name.trim().eq_ignore_ascii_case(PASSIVE_MARKER) {
                    continue;
                }
                let key = text::normalize_name(name);
                let key = if key.is_empty() { name.trim().to_lowercase() } else { key };
                if key.is_empty() {
                    continue;
                }
                named = true;
                let next_id = out.sources.len();
                let id = *by_key.entry(key).or_insert_with(|| {
                    out.sources.push(Source {
                        source_id: next_id,
                        canonical_name: name.trim().to_owned(),
                        mentions: Vec::new(),
                        is_passive: false,
                    });
                    next_id
                });
                out.map.insert(sentence.index, id, gold.channel);
            }
            if gold.is_passive() || !named {
                let id = *passive_id.get_or_insert_with(|| {
                    let id = out.sources.len();
                    out.sources.push(Source::passive(id));
                    id
                });
                out.map.insert(sentence.index, id, gold.channel);
            }
        }
        out
    }
}
