//! Lexical resources for the rule baselines: speaking verbs, source signifiers
//! and quote-attribution patterns.
//!
//! Lexicon files hold one entry per line; blank lines and lines starting with
//! `#` are skipped. Entries are lowercased and deduplicated, so loading is
//! independent of line order.

use std::collections::{BTreeMap, BTreeSet};
use std::fs;
use std::path::Path;

use crate::error::{Error, Result};
use crate::model::Sentence;
use crate::text::NormalizedText;

const DEFAULT_VERBS: &str = include_str!("../data/lexicons/speaking_verbs.txt");
const DEFAULT_SIGNIFIERS: &str = include_str!("../data/lexicons/signifiers.txt");
const DEFAULT_PATTERNS: &str = include_str!("../data/lexicons/patterns.txt");

pub const VERBS_FILE: &str = "speaking_verbs.txt";
pub const SIGNIFIERS_FILE: &str = "signifiers.txt";
pub const PATTERNS_FILE: &str = "patterns.txt";

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LexiconKind {
    SpeakingVerbs,
    Signifiers,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Lexicon {
    SpeakingVerbs(SpeakingVerbLexicon),
    Signifiers(SignifierLexicon),
}

impl Lexicon {
    pub fn len(&self) -> usize {
        match self {
            Lexicon::SpeakingVerbs(l) => l.len(),
            Lexicon::Signifiers(l) => l.len(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

/// Reads a lexicon file of the given kind.
pub fn load_lexicon(path: &Path, kind: LexiconKind) -> Result<Lexicon> {
    let raw = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let origin = path.display().to_string();
    Ok(match kind {
        LexiconKind::SpeakingVerbs => Lexicon::SpeakingVerbs(SpeakingVerbLexicon::parse(&raw, &origin)?),
        LexiconKind::Signifiers => Lexicon::Signifiers(SignifierLexicon::parse(&raw, &origin)?),
    })
}

/// Non-comment, non-blank lines with their 1-based line numbers.
fn entry_lines(raw: &str) -> impl Iterator<Item = (usize, &str)> {
    raw.lines()
        .enumerate()
        .map(|(i, l)| (i + 1, l.trim()))
        .filter(|(_, l)| !l.is_empty() && !l.starts_with('#'))
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SpeakingVerbLexicon {
    lemmas: BTreeSet<String>,
}

impl SpeakingVerbLexicon {
    pub fn parse(raw: &str, origin: &str) -> Result<Self> {
        let mut lemmas = BTreeSet::new();
        for (line, entry) in entry_lines(raw) {
            if entry.contains(char::is_whitespace) {
                return Err(Error::Config(format!(
                    "{origin}:{line}: speaking verb {entry:?} contains whitespace"
                )));
            }
            lemmas.insert(entry.to_lowercase());
        }
        if lemmas.is_empty() {
            return Err(Error::Config(format!("{origin}: speaking-verb lexicon is empty")));
        }
        Ok(Self { lemmas })
    }

    pub fn from_lemmas<I, S>(lemmas: I) -> Result<Self>
    where
        I: IntoIterator<Item = S>,
        S: AsRef<str>,
    {
        let joined: Vec<String> = lemmas.into_iter().map(|s| s.as_ref().to_owned()).collect();
        Self::parse(&joined.join("\n"), "<inline>")
    }

    pub fn contains(&self, lemma: &str) -> bool {
        self.lemmas.contains(&lemma.to_lowercase())
    }

    pub fn len(&self) -> usize {
        self.lemmas.len()
    }

    pub fn is_empty(&self) -> bool {
        self.lemmas.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = &str> {
        self.lemmas.iter().map(String::as_str)
    }

    pub fn with_lemma(&self, lemma: &str) -> Self {
        let mut lemmas = self.lemmas.clone();
        lemmas.insert(lemma.to_lowercase());
        Self { lemmas }
    }
}

/// Token indices whose lemma is a speaking verb and whose POS is `VERB`.
pub fn contains_speaking_verb(sentence: &Sentence, lexicon: &SpeakingVerbLexicon) -> Vec<usize> {
    sentence
        .tokens
        .iter()
        .filter(|t| t.is_verb() && lexicon.contains(&t.lemma))
        .map(|t| t.index)
        .collect()
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SignifierLexicon {
    phrases: BTreeSet<String>,
    /// First word to the word sequences starting with it, longest first.
    by_first: BTreeMap<String, Vec<Vec<String>>>,
}

impl SignifierLexicon {
    pub fn parse(raw: &str, origin: &str) -> Result<Self> {
        let phrases: BTreeSet<String> = entry_lines(raw)
            .map(|(_, e)| e.split_whitespace().collect::<Vec<_>>().join(" ").to_lowercase())
            .collect();
        if phrases.is_empty() {
            return Err(Error::Config(format!("{origin}: signifier lexicon is empty")));
        }
        let mut by_first: BTreeMap<String, Vec<Vec<String>>> = BTreeMap::new();
        for p in &phrases {
            let words: Vec<String> = p.split(' ').map(str::to_owned).collect();
            by_first.entry(words[0].clone()).or_default().push(words);
        }
        for seqs in by_first.values_mut() {
            seqs.sort_by(|a, b| b.len().cmp(&a.len()).then_with(|| a.cmp(b)));
        }
        Ok(Self { phrases, by_first })
    }

    pub fn from_phrases<I, S>(phrases: I) -> Result<Self>
    where
        I: IntoIterator<Item = S>,
        S: AsRef<str>,
    {
        let joined: Vec<String> = phrases.into_iter().map(|s| s.as_ref().to_owned()).collect();
        Self::parse(&joined.join("\n"), "<inline>")
    }

    pub fn len(&self) -> usize {
        self.phrases.len()
    }

    pub fn is_empty(&self) -> bool {
        self.phrases.is_empty()
    }

    pub fn contains(&self, phrase: &str) -> bool {
        self.phrases.contains(phrase)
    }

    /// Longest lexicon phrase starting at token `start`. A token matches a
    /// phrase word by lowercase form or lowercase lemma. Returns the phrase
    /// length in tokens and the phrase itself.
    pub fn longest_match(&self, sentence: &Sentence, start: usize) -> Option<(usize, &str)> {
        let tokens = &sentence.tokens;
        let word_at = |i: usize, w: &str| {
            tokens
                .get(i)
                .is_some_and(|t| t.form.to_lowercase() == w || t.lemma.to_lowercase() == w)
        };
        let first = &tokens[start];
        let keys = [first.form.to_lowercase(), first.lemma.to_lowercase()];
        let mut best: Option<&Vec<String>> = None;
        for key in keys.iter() {
            let Some(seqs) = self.by_first.get(key) else { continue };
            if let Some(seq) = seqs
                .iter()
                .find(|seq| seq.iter().enumerate().all(|(k, w)| word_at(start + k, w)))
            {
                if best.is_none_or(|b| seq.len() > b.len()) {
                    best = Some(seq);
                }
            }
        }
        best.map(|seq| {
            let phrase = self.phrases.get(&seq.join(" ")).expect("indexed phrase");
            (seq.len(), phrase.as_str())
        })
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum PatternElement {
    /// Normalized literal text (quote marks unified, whitespace collapsed, lowercase).
    Literal(String),
    Quote,
    Speaker,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Pattern {
    pub pattern_id: usize,
    pub source: String,
    pub elements: Vec<PatternElement>,
}

impl Pattern {
    /// Parses a template such as `"$Q," said $S`.
    pub fn parse(pattern_id: usize, template: &str) -> Result<Self> {
        let bad = |m: &str| Error::Config(format!("pattern {pattern_id} {template:?}: {m}"));
        let mut elements = Vec::new();
        let mut literal = String::new();
        let mut rest = template;
        let (mut quotes, mut speakers) = (0, 0);
        while let Some(pos) = rest.find('$') {
            let slot = match rest[pos + 1..].chars().next() {
                Some('Q') => PatternElement::Quote,
                Some('S') => PatternElement::Speaker,
                _ => {
                    literal.push_str(&rest[..=pos]);
                    rest = &rest[pos + 1..];
                    continue;
                }
            };
            literal.push_str(&rest[..pos]);
            if !literal.is_empty() {
                elements.push(PatternElement::Literal(normalize_literal(&literal)));
                literal.clear();
            }
            match slot {
                PatternElement::Quote => quotes += 1,
                _ => speakers += 1,
            }
            elements.push(slot);
            rest = &rest[pos + 2..];
        }
        literal.push_str(rest);
        if !literal.is_empty() {
            elements.push(PatternElement::Literal(normalize_literal(&literal)));
        }
        if quotes != 1 || speakers != 1 {
            return Err(bad("needs exactly one $Q and one $S slot"));
        }
        let first_slot = elements.iter().position(|e| !matches!(e, PatternElement::Literal(_))).unwrap();
        match elements.get(first_slot + 1) {
            Some(PatternElement::Literal(l)) if !l.trim().is_empty() => {}
            _ => return Err(bad("slots must be separated by literal text")),
        }
        Ok(Self {
            pattern_id,
            source: template.to_owned(),
            elements,
        })
    }

    /// Total bytes of literal text, used to break ties between equal-length matches.
    pub fn literal_len(&self) -> usize {
        self.elements
            .iter()
            .map(|e| match e {
                PatternElement::Literal(l) => l.len(),
                _ => 0,
            })
            .sum()
    }
}

fn normalize_literal(raw: &str) -> String {
    NormalizedText::new(raw).text.to_ascii_lowercase()
}

#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct PatternSet {
    pub patterns: Vec<Pattern>,
}

impl PatternSet {
    /// One template per line; pattern ids are 0-based positions among the entries.
    pub fn parse(raw: &str, origin: &str) -> Result<Self> {
        let patterns = entry_lines(raw)
            .enumerate()
            .map(|(id, (line, entry))| {
                Pattern::parse(id, entry).map_err(|e| Error::Config(format!("{origin}:{line}: {e}")))
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(Self { patterns })
    }

    pub fn load(path: &Path) -> Result<Self> {
        let raw = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::parse(&raw, &path.display().to_string())
    }

    pub fn len(&self) -> usize {
        self.patterns.len()
    }

    pub fn is_empty(&self) -> bool {
        self.patterns.is_empty()
    }
}

/// The three resources bundled together.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Lexicons {
    pub verbs: SpeakingVerbLexicon,
    pub signifiers: SignifierLexicon,
    pub patterns: PatternSet,
}

impl Lexicons {
    /// The starter lexicons compiled into the crate.
    pub fn shipped() -> Self {
        Self {
            verbs: SpeakingVerbLexicon::parse(DEFAULT_VERBS, VERBS_FILE).expect("shipped verbs"),
            signifiers: SignifierLexicon::parse(DEFAULT_SIGNIFIERS, SIGNIFIERS_FILE).expect("shipped signifiers"),
            patterns: PatternSet::parse(DEFAULT_PATTERNS, PATTERNS_FILE).expect("shipped patterns"),
        }
    }

    /// Loads `speaking_verbs.txt`, `signifiers.txt` and (optionally) `patterns.txt` from a directory.
    pub fn load_dir(dir: &Path) -> Result<Self> {
        let verbs = match load_lexicon(&dir.join(VERBS_FILE), LexiconKind::SpeakingVerbs)? {
            Lexicon::SpeakingVerbs(v) => v,
            Lexicon::Signifiers(_) => unreachable!(),
        };
        let signifiers = match load_lexicon(&dir.join(SIGNIFIERS_FILE), LexiconKind::Signifiers)? {
            Lexicon::Signifiers(s) => s,
            Lexicon::SpeakingVerbs(_) => unreachable!(),
        };
        let patterns_path = dir.join(PATTERNS_FILE);
        let patterns = if patterns_path.exists() {
            PatternSet::load(&patterns_path)?
        } else {
            PatternSet::default()
        };
        Ok(Self {
            verbs,
            signifiers,
            patterns,
        })
    }
}
