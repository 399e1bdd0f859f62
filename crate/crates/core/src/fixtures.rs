//! Compact constructors for hand-written documents, used by tests and examples.

use crate::model::{Document, GoldLabel, Sentence, Token};

/// `(form, lemma, upos, head, deprel, entity_tag)` with a 1-based head and 0 for the root.
pub type TokenSpec<'a> = (&'a str, &'a str, &'a str, usize, &'a str, &'a str);

/// Builds a sentence, locating each token form in `text` left to right.
///
/// Panics when a form cannot be found; fixtures are expected to be correct.
pub fn sent(text: &str, tokens: &[TokenSpec]) -> Sentence {
    let mut cursor = 0;
    let tokens = tokens
        .iter()
        .enumerate()
        .map(|(i, &(form, lemma, upos, head, deprel, tag))| {
            let start = cursor + text[cursor..].find(form).unwrap_or_else(|| panic!("{form:?} not in {text:?}"));
            cursor = start + form.len();
            Token {
                index: i,
                form: form.to_owned(),
                lemma: lemma.to_owned(),
                upos: upos.to_owned(),
                head: head.checked_sub(1),
                deprel: deprel.to_owned(),
                entity_tag: tag.to_owned(),
                char_start: start,
                char_end: cursor,
            }
        })
        .collect();
    Sentence {
        index: 0,
        text: text.to_owned(),
        tokens,
        gold: None,
    }
}

/// Attaches a gold label to a sentence.
pub fn with_gold(mut s: Sentence, gold: GoldLabel) -> Sentence {
    s.gold = Some(gold);
    s
}

/// Builds version 0 of a document, renumbering sentences.
pub fn doc(doc_id: &str, sentences: Vec<Sentence>) -> Document {
    let sentences = sentences
        .into_iter()
        .enumerate()
        .map(|(i, mut s)| {
            s.index = i;
            s
        })
        .collect();
    Document {
        doc_id: doc_id.to_owned(),
        version_id: 0,
        outlet: None,
        topic: None,
        sentences,
    }
}
