//! Text normalization shared by the rule baselines, name resolution and evaluation.
//!
//! Two kinds of normalization live here. Quote normalization rewrites the
//! typographic and LaTeX-style quote marks to ASCII `"` and collapses whitespace
//! while keeping a byte-offset map back to the original text. Name normalization
//! turns a source name into the comparison key used by the resolution cascade.

/// Honorific tokens dropped from names before comparison.
pub const HONORIFICS: &[&str] = &["mr", "ms", "mrs", "dr"];

const LEADING_ARTICLES: &[&str] = &["the", "a", "an"];

/// Sentence text with quote marks unified and whitespace collapsed.
#[derive(Debug, Clone)]
pub struct NormalizedText {
    pub text: String,
    /// For every byte offset of `text` (plus one past the end), the byte offset in the original.
    orig_of: Vec<usize>,
    /// For every byte offset of the original (plus one past the end), the offset in `text`.
    norm_of: Vec<usize>,
}

impl NormalizedText {
    pub fn new(original: &str) -> Self {
        let mut text = String::with_capacity(original.len());
        let mut orig_of = Vec::with_capacity(original.len() + 1);
        let mut norm_of = vec![0; original.len() + 1];

        let bytes = original.as_bytes();
        let mut chars = original.char_indices().peekable();
        while let Some((pos, ch)) = chars.next() {
            let width = ch.len_utf8();
            // `` and '' are two-character double quotes.
            let doubled = (ch == '`' || ch == '\'') && bytes.get(pos + 1) == Some(&(ch as u8));
            let (out, consumed) = if doubled {
                chars.next();
                ('"', 2)
            } else {
                match ch {
                    '\u{201C}' | '\u{201D}' | '\u{201E}' | '\u{201F}' => ('"', width),
                    '\u{2018}' | '\u{2019}' => ('\'', width),
                    c if c.is_whitespace() => (' ', width),
                    c => (c, width),
                }
            };
            if out == ' ' && text.ends_with(' ') {
                for k in 0..consumed {
                    norm_of[pos + k] = text.len() - 1;
                }
                continue;
            }
            for k in 0..consumed {
                norm_of[pos + k] = text.len();
            }
            for _ in 0..out.len_utf8() {
                orig_of.push(pos);
            }
            text.push(out);
        }
        orig_of.push(original.len());
        norm_of[original.len()] = text.len();
        Self {
            text,
            orig_of,
            norm_of,
        }
    }

    pub fn to_original(&self, norm_offset: usize) -> usize {
        self.orig_of[norm_offset]
    }

    pub fn to_normalized(&self, orig_offset: usize) -> usize {
        self.norm_of[orig_offset]
    }
}

/// True when the text contains a pair of double quote marks enclosing non-blank content.
pub fn has_double_quoted_span(text: &str) -> bool {
    let norm = NormalizedText::new(text);
    let mut rest = norm.text.as_str();
    while let Some(open) = rest.find('"') {
        let after = &rest[open + 1..];
        match after.find('"') {
            Some(close) if !after[..close].trim().is_empty() => return true,
            Some(close) => rest = &after[close + 1..],
            None => return false,
        }
    }
    false
}

/// Comparison key for a source name: lowercase, punctuation stripped,
/// honorifics removed, leading article removed.
pub fn normalize_name(name: &str) -> String {
    let lowered = name.to_lowercase().replace('\u{2019}', "'");
    let trimmed = lowered.trim();
    let without_possessive = trimmed
        .strip_suffix("'s")
        .or_else(|| trimmed.strip_suffix('\''))
        .unwrap_or(trimmed);
    let cleaned: String = without_possessive
        .chars()
        .map(|c| if c.is_alphanumeric() { c } else { ' ' })
        .collect();
    let mut words: Vec<&str> = cleaned
        .split_whitespace()
        .filter(|w| !HONORIFICS.contains(w))
        .collect();
    if words.len() > 1 && LEADING_ARTICLES.contains(&words[0]) {
        words.remove(0);
    }
    words.join(" ")
}

/// Last word of an already-normalized name.
pub fn last_word(normalized: &str) -> Option<&str> {
    normalized.split(' ').next_back().filter(|w| !w.is_empty())
}

/// True when `needle` occurs in `haystack` as a contiguous run of whole words.
pub fn contains_words(haystack: &str, needle: &str) -> bool {
    if needle.is_empty() {
        return false;
    }
    let hay: Vec<&str> = haystack.split(' ').collect();
    let need: Vec<&str> = needle.split(' ').collect();
    need.len() <= hay.len() && hay.windows(need.len()).any(|w| w == need.as_slice())
}
