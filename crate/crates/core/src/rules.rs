//! Deterministic attribution baselines.
//!
//! Mentions are PERSON named entities and lexicon signifiers. PERSON mentions
//! cluster on their final name word, signifiers on the matched lexicon phrase.
//! Three baselines run over the clustered sources:
//!
//! * R1 (co-occurrence): a sentence containing a speaking verb is attributed to
//!   every source mentioned in it.
//! * R2 (governance): a mention whose head token is an `nsubj` dependent of a
//!   speaking verb attributes its sentence to its source.
//! * Patterns: lexical templates with a quote slot and a speaker slot.

use std::collections::BTreeMap;

use crate::error::{Error, Result};
use crate::lexicon::{contains_speaking_verb, Lexicons, PatternElement, PatternSet, SignifierLexicon};
use crate::model::{Document, DocumentAttribution, InformationChannel, Mention, Sentence, Source, SourceId};
use crate::text::{self, NormalizedText};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum MentionKind {
    PersonNe,
    Signifier,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct EntityMention {
    pub sentence: usize,
    pub start: usize,
    pub end: usize,
    pub surface: String,
    pub kind: MentionKind,
    /// Display form: the surface, without honorifics for people.
    pub name: String,
    /// Clustering key: final name word for people, lexicon phrase for signifiers.
    pub key: String,
}

fn is_person_type(t: &str) -> bool {
    t == "PERSON" || t == "PER"
}

/// Extracts PERSON and signifier mentions in document order. Pronoun tokens
/// never belong to a mention.
pub fn extract_mentions(doc: &Document, signifiers: &SignifierLexicon) -> Vec<EntityMention> {
    let mut out = Vec::new();
    for sentence in &doc.sentences {
        let person = person_spans(sentence);
        let mut covered = vec![false; sentence.tokens.len()];
        for &(s, e) in &person {
            covered[s..e].iter_mut().for_each(|c| *c = true);
        }
        let mut found: Vec<EntityMention> = person
            .into_iter()
            .filter_map(|(s, e)| person_mention(sentence, s, e))
            .collect();

        let mut i = 0;
        while i < sentence.tokens.len() {
            if covered[i] || sentence.tokens[i].is_pronoun() {
                i += 1;
                continue;
            }
            match signifiers.longest_match(sentence, i) {
                // A signifier directly before a person name is a title ("Prime Minister Lamothe").
                Some((len, phrase))
                    if (i..i + len).all(|k| !covered[k] && !sentence.tokens[k].is_pronoun())
                        && !covered.get(i + len).copied().unwrap_or(false) =>
                {
                    let surface = sentence.span_text(i, i + len).to_owned();
                    found.push(EntityMention {
                        sentence: sentence.index,
                        start: i,
                        end: i + len,
                        name: surface.clone(),
                        surface,
                        kind: MentionKind::Signifier,
                        key: phrase.to_owned(),
                    });
                    i += len;
                }
                _ => i += 1,
            }
        }
        found.sort_by_key(|m| m.start);
        out.extend(found);
    }
    out
}

/// Maximal runs of PERSON-tagged, non-pronoun tokens, split at `B-` tags.
fn person_spans(sentence: &Sentence) -> Vec<(usize, usize)> {
    let mut spans = Vec::new();
    let mut open: Option<usize> = None;
    for (i, tok) in sentence.tokens.iter().enumerate() {
        let is_person = tok.entity_type().is_some_and(is_person_type) && !tok.is_pronoun();
        if let Some(s) = open {
            if !is_person || tok.begins_entity() {
                spans.push((s, i));
                open = None;
            }
        }
        if is_person && open.is_none() {
            open = Some(i);
        }
    }
    if let Some(s) = open {
        spans.push((s, sentence.tokens.len()));
    }
    spans
}

fn is_honorific(form: &str) -> bool {
    text::HONORIFICS.contains(&form.to_lowercase().trim_end_matches('.'))
}

fn person_mention(sentence: &Sentence, start: usize, end: usize) -> Option<EntityMention> {
    let tokens = &sentence.tokens;
    // Trailing possessive markers and punctuation are not part of the name.
    let mut end = end;
    while end > start && matches!(tokens[end - 1].upos.as_str(), "PART" | "PUNCT") {
        end -= 1;
    }
    let name_tokens: Vec<usize> = (start..end)
        .filter(|&k| !is_honorific(&tokens[k].form))
        .collect();
    let (&first, &last) = (name_tokens.first()?, name_tokens.last()?);
    let name = sentence.span_text(first, last + 1).to_owned();
    let normalized = text::normalize_name(&name);
    let key = text::last_word(&normalized)?.to_owned();
    Some(EntityMention {
        sentence: sentence.index,
        start,
        end,
        surface: sentence.span_text(start, end).to_owned(),
        kind: MentionKind::PersonNe,
        name,
        key,
    })
}

/// Clusters mentions into sources, ordered (and numbered) by first mention.
pub fn canonicalize_entities(doc: &Document, signifiers: &SignifierLexicon) -> Vec<Source> {
    let mentions = extract_mentions(doc, signifiers);
    let mut order: Vec<(MentionKind, String)> = Vec::new();
    let mut clusters: BTreeMap<(MentionKind, String), Vec<&EntityMention>> = BTreeMap::new();
    for m in &mentions {
        let key = (m.kind, m.key.clone());
        let entry = clusters.entry(key.clone()).or_default();
        if entry.is_empty() {
            order.push(key);
        }
        entry.push(m);
    }
    order
        .into_iter()
        .enumerate()
        .map(|(source_id, key)| {
            let members = &clusters[&key];
            let mut best = members[0];
            for m in members.iter().skip(1) {
                if m.name.chars().count() > best.name.chars().count() {
                    best = m;
                }
            }
            Source {
                source_id,
                canonical_name: best.name.clone(),
                mentions: members
                    .iter()
                    .map(|m| Mention {
                        sentence: m.sentence,
                        start: m.start,
                        end: m.end,
                    })
                    .collect(),
                is_passive: false,
            }
        })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Rule {
    R1,
    R2,
    Pattern(usize),
}

/// Evidence for one rule-produced attribution.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RuleAttribution {
    pub sentence: usize,
    pub source_id: SourceId,
    pub rule: Rule,
    /// The speaking verb (R1, R2) or the first token of the pattern match.
    pub trigger_token: usize,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RuleOutput {
    pub attribution: DocumentAttribution,
    pub evidence: Vec<RuleAttribution>,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct RuleConfig {
    /// Let R2 accept `nsubj:pass` as well as `nsubj`.
    pub include_passive_subjects: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RuleBackend {
    R1,
    R2,
    Patterns,
}

impl RuleBackend {
    pub fn attribute(self, doc: &Document, lexicons: &Lexicons, cfg: RuleConfig) -> Result<RuleOutput> {
        match self {
            RuleBackend::R1 => Ok(r1_attribute(doc, lexicons)),
            RuleBackend::R2 => r2_attribute(doc, lexicons, cfg),
            RuleBackend::Patterns => Ok(pattern_attribute(doc, lexicons)),
        }
    }
}

fn quote_channel(sentence: &Sentence) -> InformationChannel {
    if sentence.has_quoted_span() {
        InformationChannel::DirectQuote
    } else {
        InformationChannel::IndirectQuote
    }
}

fn finish(doc: &Document, sources: Vec<Source>, evidence: Vec<RuleAttribution>) -> RuleOutput {
    let mut attribution = DocumentAttribution {
        doc_id: doc.doc_id.clone(),
        version_id: doc.version_id,
        sources,
        map: Default::default(),
    };
    for ev in &evidence {
        let channel = match ev.rule {
            Rule::Pattern(_) => InformationChannel::DirectQuote,
            _ => quote_channel(&doc.sentences[ev.sentence]),
        };
        attribution.map.insert(ev.sentence, ev.source_id, channel);
    }
    attribution.prune_unused();
    RuleOutput { attribution, evidence }
}

fn mentions_by_sentence(sources: &[Source]) -> BTreeMap<usize, Vec<(Mention, SourceId)>> {
    let mut by_sentence: BTreeMap<usize, Vec<(Mention, SourceId)>> = BTreeMap::new();
    for s in sources {
        for m in &s.mentions {
            by_sentence.entry(m.sentence).or_default().push((*m, s.source_id));
        }
    }
    for v in by_sentence.values_mut() {
        v.sort();
    }
    by_sentence
}

/// Co-occurrence baseline.
pub fn r1_attribute(doc: &Document, lexicons: &Lexicons) -> RuleOutput {
    let sources = canonicalize_entities(doc, &lexicons.signifiers);
    let by_sentence = mentions_by_sentence(&sources);
    let mut evidence = Vec::new();
    for sentence in &doc.sentences {
        let verbs = contains_speaking_verb(sentence, &lexicons.verbs);
        let Some(&trigger) = verbs.first() else { continue };
        let mut seen = Vec::new();
        for (_, id) in by_sentence.get(&sentence.index).into_iter().flatten() {
            if !seen.contains(id) {
                seen.push(*id);
                evidence.push(RuleAttribution {
                    sentence: sentence.index,
                    source_id: *id,
                    rule: Rule::R1,
                    trigger_token: trigger,
                });
            }
        }
    }
    finish(doc, sources, evidence)
}

fn has_dependencies(doc: &Document) -> std::result::Result<(), Error> {
    for s in &doc.sentences {
        if let Some(t) = s.tokens.iter().find(|t| t.deprel.is_empty() || t.deprel == "_") {
            return Err(Error::Structure(format!(
                "document {:?} sentence {} token {}: missing dependency annotation",
                doc.doc_id, s.index, t.index
            )));
        }
    }
    Ok(())
}

/// Token of `[start, end)` whose head lies outside the span (or is the root).
fn span_head(sentence: &Sentence, start: usize, end: usize) -> usize {
    (start..end)
        .find(|&k| sentence.tokens[k].head.is_none_or(|h| h < start || h >= end))
        .unwrap_or(end - 1)
}

/// Governance baseline.
pub fn r2_attribute(doc: &Document, lexicons: &Lexicons, cfg: RuleConfig) -> Result<RuleOutput> {
    has_dependencies(doc)?;
    let sources = canonicalize_entities(doc, &lexicons.signifiers);
    let by_sentence = mentions_by_sentence(&sources);
    let mut evidence = Vec::new();
    for sentence in &doc.sentences {
        for (m, id) in by_sentence.get(&sentence.index).into_iter().flatten() {
            let head = &sentence.tokens[span_head(sentence, m.start, m.end)];
            let relation_ok = head.deprel == "nsubj" || (cfg.include_passive_subjects && head.deprel == "nsubj:pass");
            let Some(governor) = head.head.filter(|_| relation_ok) else { continue };
            if !lexicons.verbs.contains(&sentence.tokens[governor].lemma) {
                continue;
            }
            let dup = evidence
                .iter()
                .any(|e: &RuleAttribution| e.sentence == sentence.index && e.source_id == *id);
            if !dup {
                evidence.push(RuleAttribution {
                    sentence: sentence.index,
                    source_id: *id,
                    rule: Rule::R2,
                    trigger_token: governor,
                });
            }
        }
    }
    Ok(finish(doc, sources, evidence))
}

/// One accepted template match.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PatternMatch {
    pub sentence: usize,
    pub pattern_id: usize,
    /// Byte range of the whole match in the original sentence text.
    pub span: (usize, usize),
    /// Byte range of the quote slot in the original sentence text.
    pub quote_span: (usize, usize),
    pub quote: String,
    pub source_id: SourceId,
}

struct SentenceView<'a> {
    norm: NormalizedText,
    token_starts: Vec<usize>,
    token_ends: Vec<usize>,
    /// Normalized (start, end, source) per mention.
    mentions: Vec<(usize, usize, SourceId)>,
    _sentence: &'a Sentence,
}

impl<'a> SentenceView<'a> {
    fn new(sentence: &'a Sentence, mentions: &[(Mention, SourceId)]) -> Self {
        let norm = NormalizedText::new(&sentence.text);
        let token_starts = sentence.tokens.iter().map(|t| norm.to_normalized(t.char_start)).collect();
        let token_ends = sentence.tokens.iter().map(|t| norm.to_normalized(t.char_end)).collect();
        let mentions = mentions
            .iter()
            .map(|(m, id)| {
                let s = norm.to_normalized(sentence.tokens[m.start].char_start);
                let e = norm.to_normalized(sentence.tokens[m.end - 1].char_end);
                (s, e, *id)
            })
            .collect();
        Self {
            norm,
            token_starts,
            token_ends,
            mentions,
            _sentence: sentence,
        }
    }
}

#[derive(Debug, Clone, Copy, Default)]
struct Captures {
    quote: Option<(usize, usize)>,
    speaker: Option<SourceId>,
}

fn literal_at(text: &str, pos: usize, lit: &str) -> bool {
    let hay = &text.as_bytes()[pos..];
    hay.len() >= lit.len() && hay[..lit.len()].eq_ignore_ascii_case(lit.as_bytes())
}

fn match_from(view: &SentenceView, elems: &[PatternElement], pos: usize, caps: Captures) -> Option<(usize, Captures)> {
    let text = view.norm.text.as_str();
    let Some((first, rest)) = elems.split_first() else {
        return Some((pos, caps));
    };
    match first {
        PatternElement::Literal(lit) => {
            if literal_at(text, pos, lit) {
                match_from(view, rest, pos + lit.len(), caps)
            } else {
                None
            }
        }
        PatternElement::Quote => {
            if pos == 0 || text.as_bytes()[pos - 1] != b'"' {
                return None;
            }
            for (off, ch) in text[pos..].char_indices().skip(1).chain([(text.len() - pos, ' ')]) {
                let end = pos + off;
                if text[pos..end].contains('"') {
                    break;
                }
                let _ = ch;
                if text[pos..end].trim().is_empty() {
                    continue;
                }
                let closes = text[end..]
                    .trim_start_matches([',', '.', '!', '?', ';', ':', ' '])
                    .starts_with('"');
                if !closes {
                    continue;
                }
                let next = Captures {
                    quote: Some((pos, end)),
                    ..caps
                };
                if let Some(done) = match_from(view, rest, end, next) {
                    return Some(done);
                }
            }
            None
        }
        PatternElement::Speaker => {
            if !view.token_starts.contains(&pos) {
                return None;
            }
            let mut ends: Vec<usize> = view.token_ends.iter().copied().filter(|&e| e > pos).collect();
            ends.sort_unstable();
            ends.dedup();
            for end in ends {
                if text[pos..end].contains('"') {
                    break;
                }
                let covered = view
                    .mentions
                    .iter()
                    .filter(|(s, e, _)| *s >= pos && *e <= end)
                    .max_by_key(|(s, e, _)| (*e, *s));
                let Some(&(_, _, id)) = covered else { continue };
                let next = Captures {
                    speaker: Some(id),
                    ..caps
                };
                if let Some(done) = match_from(view, rest, end, next) {
                    return Some(done);
                }
            }
            None
        }
    }
}

/// Finds template matches. Within a sentence matches are taken left to right;
/// overlapping candidates resolve by earliest start, then longest match, then
/// most literal text, then lowest pattern id.
pub fn match_patterns(doc: &Document, patterns: &PatternSet, sources: &[Source]) -> Vec<PatternMatch> {
    let by_sentence = mentions_by_sentence(sources);
    let mut out = Vec::new();
    for sentence in &doc.sentences {
        let Some(mentions) = by_sentence.get(&sentence.index) else { continue };
        let view = SentenceView::new(sentence, mentions);
        let text = view.norm.text.as_str();
        let mut candidates = Vec::new();
        for p in &patterns.patterns {
            for (start, _) in text.char_indices() {
                if let Some((end, caps)) = match_from(&view, &p.elements, start, Captures::default()) {
                    if let (Some(q), Some(id)) = (caps.quote, caps.speaker) {
                        candidates.push((start, end, p.literal_len(), p.pattern_id, q, id));
                    }
                }
            }
        }
        candidates.sort_by(|a, b| {
            a.0.cmp(&b.0)
                .then((b.1 - b.0).cmp(&(a.1 - a.0)))
                .then(b.2.cmp(&a.2))
                .then(a.3.cmp(&b.3))
        });
        let mut last_end = 0;
        for (start, end, _, pattern_id, (qs, qe), source_id) in candidates {
            if start < last_end {
                continue;
            }
            last_end = end;
            let quote_span = (view.norm.to_original(qs), view.norm.to_original(qe));
            out.push(PatternMatch {
                sentence: sentence.index,
                pattern_id,
                span: (view.norm.to_original(start), view.norm.to_original(end)),
                quote_span,
                quote: sentence.text[quote_span.0..quote_span.1].to_owned(),
                source_id,
            });
        }
    }
    out
}

/// Pattern baseline: every accepted match attributes its sentence to the speaker.
pub fn pattern_attribute(doc: &Document, lexicons: &Lexicons) -> RuleOutput {
    let sources = canonicalize_entities(doc, &lexicons.signifiers);
    let matches = match_patterns(doc, &lexicons.patterns, &sources);
    let mut evidence: Vec<RuleAttribution> = Vec::new();
    for m in matches {
        if evidence.iter().any(|e| e.sentence == m.sentence && e.source_id == m.source_id) {
            continue;
        }
        let trigger_token = doc.sentences[m.sentence]
            .tokens
            .iter()
            .position(|t| t.char_end > m.span.0)
            .unwrap_or(0);
        evidence.push(RuleAttribution {
            sentence: m.sentence,
            source_id: m.source_id,
            rule: Rule::Pattern(m.pattern_id),
            trigger_token,
        });
    }
    finish(doc, sources, evidence)
}
