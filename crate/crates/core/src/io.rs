//! Line-delimited JSON artifacts.
//!
//! Every file holds one record per line: documents, attributions, predictions,
//! version pairs or probe examples. Readers stream; a malformed line yields a
//! [`Error::Record`] carrying its 1-based line number and the reader moves on.
//! Writers go through a temporary file in the target directory that is renamed
//! into place, so a failed run never leaves a truncated artifact.
//!
//! Offsets (`char_start`, `char_end`) are UTF-8 byte offsets into the sentence
//! text. Token `head` is the 0-based index of the head token, `null` for the
//! root. Sentence and token indices are implied by position. Floats are
//! written with six decimals.

use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::marker::PhantomData;
use std::path::Path;
use std::str::FromStr;

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use serde_json::{Number, Value};

use crate::error::{Error, Result};
use crate::model::{
    AttributionMap, Document, DocumentAttribution, GoldLabel, InformationChannel, Sentence, Source, Token, Topic,
};
use crate::neural::Prediction;
use crate::probes::{ProbeExample, VersionPair};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TokenRecord {
    pub form: String,
    pub lemma: String,
    pub upos: String,
    pub head: Option<usize>,
    pub deprel: String,
    pub entity_tag: String,
    pub char_start: usize,
    pub char_end: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SentenceRecord {
    pub text: String,
    pub tokens: Vec<TokenRecord>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub gold: Option<GoldLabel>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DocumentRecord {
    pub doc_id: String,
    #[serde(default)]
    pub version_id: u32,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub outlet: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub topic: Option<Topic>,
    pub sentences: Vec<SentenceRecord>,
}

impl From<DocumentRecord> for Document {
    fn from(r: DocumentRecord) -> Self {
        Document {
            doc_id: r.doc_id,
            version_id: r.version_id,
            outlet: r.outlet,
            topic: r.topic,
            sentences: r
                .sentences
                .into_iter()
                .enumerate()
                .map(|(index, s)| Sentence {
                    index,
                    text: s.text,
                    gold: s.gold,
                    tokens: s
                        .tokens
                        .into_iter()
                        .enumerate()
                        .map(|(i, t)| Token {
                            index: i,
                            form: t.form,
                            lemma: t.lemma,
                            upos: t.upos,
                            head: t.head,
                            deprel: t.deprel,
                            entity_tag: t.entity_tag,
                            char_start: t.char_start,
                            char_end: t.char_end,
                        })
                        .collect(),
                })
                .collect(),
        }
    }
}

impl From<&Document> for DocumentRecord {
    fn from(d: &Document) -> Self {
        DocumentRecord {
            doc_id: d.doc_id.clone(),
            version_id: d.version_id,
            outlet: d.outlet.clone(),
            topic: d.topic,
            sentences: d
                .sentences
                .iter()
                .map(|s| SentenceRecord {
                    text: s.text.clone(),
                    gold: s.gold.clone(),
                    tokens: s
                        .tokens
                        .iter()
                        .map(|t| TokenRecord {
                            form: t.form.clone(),
                            lemma: t.lemma.clone(),
                            upos: t.upos.clone(),
                            head: t.head,
                            deprel: t.deprel.clone(),
                            entity_tag: t.entity_tag.clone(),
                            char_start: t.char_start,
                            char_end: t.char_end,
                        })
                        .collect(),
                })
                .collect(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AttributionEntry {
    pub sentence: usize,
    pub source_id: usize,
    pub channel: InformationChannel,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AttributionRecord {
    pub doc_id: String,
    pub version_id: u32,
    pub sources: Vec<Source>,
    pub attributions: Vec<AttributionEntry>,
}

impl From<&DocumentAttribution> for AttributionRecord {
    fn from(a: &DocumentAttribution) -> Self {
        AttributionRecord {
            doc_id: a.doc_id.clone(),
            version_id: a.version_id,
            sources: a.sources.clone(),
            attributions: a
                .map
                .entries()
                .flat_map(|(sentence, set)| {
                    set.iter().map(move |x| AttributionEntry {
                        sentence,
                        source_id: x.source_id,
                        channel: x.channel,
                    })
                })
                .collect(),
        }
    }
}

impl From<AttributionRecord> for DocumentAttribution {
    fn from(r: AttributionRecord) -> Self {
        let mut map = AttributionMap::new();
        for e in r.attributions {
            map.insert(e.sentence, e.source_id, e.channel);
        }
        DocumentAttribution {
            doc_id: r.doc_id,
            version_id: r.version_id,
            sources: r.sources,
            map,
        }
    }
}

/// Rewrites every non-integer number with six decimals.
fn fix_floats(v: &mut Value) {
    match v {
        Value::Number(n) if !(n.is_i64() || n.is_u64()) => {
            if let Some(f) = n.as_f64() {
                if let Ok(fixed) = Number::from_str(&format!("{f:.6}")) {
                    *n = fixed;
                }
            }
        }
        Value::Array(xs) => xs.iter_mut().for_each(fix_floats),
        Value::Object(m) => m.values_mut().for_each(fix_floats),
        _ => {}
    }
}

/// Serializes with stable field order and fixed float formatting.
pub fn to_json_value<T: Serialize>(item: &T) -> Result<Value> {
    let mut v = serde_json::to_value(item)?;
    fix_floats(&mut v);
    Ok(v)
}

pub fn to_json_line<T: Serialize>(item: &T) -> Result<String> {
    Ok(serde_json::to_string(&to_json_value(item)?)?)
}

pub fn to_json_pretty<T: Serialize>(item: &T) -> Result<String> {
    Ok(serde_json::to_string_pretty(&to_json_value(item)?)?)
}

/// Streams records of type `R` from a JSONL file. Items are `(line, record)`
/// pairs; blank lines are skipped.
pub struct JsonlReader<R> {
    path: String,
    lines: std::io::Lines<BufReader<File>>,
    line: usize,
    _record: PhantomData<R>,
}

impl<R: DeserializeOwned> JsonlReader<R> {
    pub fn open(path: &Path) -> Result<Self> {
        let file = File::open(path).map_err(|e| Error::io(path, e))?;
        Ok(Self {
            path: path.display().to_string(),
            lines: BufReader::new(file).lines(),
            line: 0,
            _record: PhantomData,
        })
    }
}

fn doc_id_hint(raw: &str) -> Option<String> {
    serde_json::from_str::<Value>(raw)
        .ok()?
        .get("doc_id")?
        .as_str()
        .map(str::to_owned)
}

impl<R: DeserializeOwned> Iterator for JsonlReader<R> {
    type Item = Result<(usize, R)>;

    fn next(&mut self) -> Option<Self::Item> {
        loop {
            let raw = match self.lines.next()? {
                Ok(l) => l,
                Err(e) => return Some(Err(Error::io(&self.path, e))),
            };
            self.line += 1;
            if raw.trim().is_empty() {
                continue;
            }
            let line = self.line;
            return Some(serde_json::from_str::<R>(&raw).map(|r| (line, r)).map_err(|e| Error::Record {
                line,
                doc_id: doc_id_hint(&raw),
                message: e.to_string(),
            }));
        }
    }
}

/// Documents in file order, validated. Record errors are yielded in place;
/// an I/O error ends the stream.
pub fn read_corpus(path: &Path) -> Result<impl Iterator<Item = Result<Document>>> {
    Ok(JsonlReader::<DocumentRecord>::open(path)?.map(|item| {
        let (line, rec) = item?;
        let doc = Document::from(rec);
        doc.validate().map_err(|e| Error::Record {
            line,
            doc_id: Some(doc.doc_id.clone()),
            message: match e.sentence {
                Some(s) => format!("sentence {s}: {}", e.message),
                None => e.message,
            },
        })?;
        Ok(doc)
    }))
}

/// Writes items atomically, one JSON line each; returns the count.
pub fn write_jsonl<T: Serialize>(path: &Path, items: impl IntoIterator<Item = T>) -> Result<usize> {
    let dir = match path.parent() {
        Some(p) if !p.as_os_str().is_empty() => p,
        _ => Path::new("."),
    };
    let tmp = tempfile::NamedTempFile::new_in(dir).map_err(|e| Error::io(dir, e))?;
    let mut count = 0;
    {
        let mut w = BufWriter::new(tmp.as_file());
        for item in items {
            writeln!(w, "{}", to_json_line(&item)?).map_err(|e| Error::io(path, e))?;
            count += 1;
        }
        w.flush().map_err(|e| Error::io(path, e))?;
    }
    tmp.persist(path).map_err(|e| Error::io(path, e.error))?;
    Ok(count)
}

/// Writes a whole text file atomically.
pub fn write_text(path: &Path, contents: &str) -> Result<()> {
    let dir = match path.parent() {
        Some(p) if !p.as_os_str().is_empty() => p,
        _ => Path::new("."),
    };
    let mut tmp = tempfile::NamedTempFile::new_in(dir).map_err(|e| Error::io(dir, e))?;
    tmp.write_all(contents.as_bytes()).map_err(|e| Error::io(path, e))?;
    tmp.persist(path).map_err(|e| Error::io(path, e.error))?;
    Ok(())
}

pub fn write_corpus<'a>(path: &Path, docs: impl IntoIterator<Item = &'a Document>) -> Result<usize> {
    write_jsonl(path, docs.into_iter().map(DocumentRecord::from))
}

pub fn write_attributions<'a>(path: &Path, attrs: impl IntoIterator<Item = &'a DocumentAttribution>) -> Result<usize> {
    write_jsonl(path, attrs.into_iter().map(AttributionRecord::from))
}

pub fn read_attributions(path: &Path) -> Result<impl Iterator<Item = Result<DocumentAttribution>>> {
    Ok(JsonlReader::<AttributionRecord>::open(path)?.map(|item| item.map(|(_, r)| r.into())))
}

pub fn write_predictions<'a>(path: &Path, preds: impl IntoIterator<Item = &'a Prediction>) -> Result<usize> {
    write_jsonl(path, preds)
}

pub fn read_predictions(path: &Path) -> Result<impl Iterator<Item = Result<Prediction>>> {
    Ok(JsonlReader::<Prediction>::open(path)?.map(|item| {
        let (line, p) = item?;
        p.validate().map_err(|message| Error::Record {
            line,
            doc_id: Some(p.doc_id.clone()),
            message,
        })?;
        Ok(p)
    }))
}

pub fn write_version_pairs<'a>(path: &Path, pairs: impl IntoIterator<Item = &'a VersionPair>) -> Result<usize> {
    write_jsonl(path, pairs)
}

pub fn read_version_pairs(path: &Path) -> Result<impl Iterator<Item = Result<VersionPair>>> {
    Ok(JsonlReader::<VersionPair>::open(path)?.map(|item| {
        let (line, p) = item?;
        if p.version_t >= p.version_t_plus_1 {
            return Err(Error::Record {
                line,
                doc_id: Some(p.doc_id.clone()),
                message: format!("version_t {} is not before version_t_plus_1 {}", p.version_t, p.version_t_plus_1),
            });
        }
        Ok(p)
    }))
}

pub fn write_probes<'a>(path: &Path, examples: impl IntoIterator<Item = &'a ProbeExample>) -> Result<usize> {
    write_jsonl(path, examples)
}

pub fn read_probes(path: &Path) -> Result<impl Iterator<Item = Result<ProbeExample>>> {
    Ok(JsonlReader::<ProbeExample>::open(path)?.map(|item| item.map(|(_, p)| p)))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn floats_get_six_decimals() {
        #[derive(Serialize)]
        struct S {
            a: f64,
            b: Option<f64>,
            c: u32,
            d: Vec<f64>,
        }
        let line = to_json_line(&S {
            a: 0.5,
            b: Some(1.0 / 3.0),
            c: 7,
            d: vec![2.0],
        })
        .unwrap();
        assert_eq!(line, r#"{"a":0.500000,"b":0.333333,"c":7,"d":[2.000000]}"#);
    }

    #[test]
    fn prediction_requires_a_field() {
        let p = Prediction {
            doc_id: "d".into(),
            sentence_index: 0,
            detector_score: None,
            retrieved_source: None,
        };
        assert!(p.validate().is_err());
    }
}
