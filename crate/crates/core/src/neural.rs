//! Attribution from externally produced model predictions.
//!
//! A detector score gates each sentence and a retrieved source name says who
//! informed it. Names are resolved against the document's canonicalized
//! sources; the same cascade is used by the evaluator so that modeling and
//! scoring agree on what counts as the same source.

use std::collections::BTreeMap;
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;
use std::time::Duration;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{Document, DocumentAttribution, InformationChannel, Source, SourceId};
use crate::text;

/// The literal null answer of the retrieval stage.
pub const NULL_ANSWER: &str = "None";

pub fn is_null_answer(raw: &str) -> bool {
    raw.trim().eq_ignore_ascii_case(NULL_ANSWER)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum PipelineMode {
    #[default]
    Pipeline,
    /// A retrieved null answer cancels the detection positive.
    PipelinePlusNones,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EndpointConfig {
    pub url: String,
    /// Name of the environment variable holding the bearer token.
    pub token_env: String,
    pub timeout: Duration,
    pub retries: u32,
    pub parallelism: usize,
    /// Delay before the first retry; doubles on every further attempt.
    pub backoff: Duration,
}

impl EndpointConfig {
    pub fn new(url: impl Into<String>, token_env: impl Into<String>) -> Self {
        Self {
            url: url.into(),
            token_env: token_env.into(),
            timeout: Duration::from_secs(30),
            retries: 3,
            parallelism: 4,
            backoff: Duration::from_millis(200),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PipelineConfig {
    pub detection_threshold: f64,
    pub mode: PipelineMode,
    /// Inputs were coreference-resolved upstream. Recorded for provenance only.
    pub coref_variant: bool,
    pub endpoint: Option<EndpointConfig>,
    /// `(sentence, source)` demonstrations prepended to every prompt.
    pub prefix_examples: Vec<(String, String)>,
    /// Prompts longer than this many characters lose the start of the article.
    pub max_prompt_chars: Option<usize>,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        Self {
            detection_threshold: 0.5,
            mode: PipelineMode::Pipeline,
            coref_variant: false,
            endpoint: None,
            prefix_examples: Vec::new(),
            max_prompt_chars: None,
        }
    }
}

impl PipelineConfig {
    pub fn validate(&self) -> Result<()> {
        let t = self.detection_threshold;
        if !(t > 0.0 && t < 1.0) {
            return Err(Error::Config(format!("detection threshold {t} must lie strictly between 0 and 1")));
        }
        if let Some(ep) = &self.endpoint {
            if ep.parallelism == 0 {
                return Err(Error::Config("endpoint parallelism must be at least 1".into()));
            }
        }
        Ok(())
    }
}

/// One line of a prediction file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Prediction {
    pub doc_id: String,
    pub sentence_index: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub detector_score: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub retrieved_source: Option<String>,
}

impl Prediction {
    pub fn validate(&self) -> std::result::Result<(), String> {
        if self.detector_score.is_none() && self.retrieved_source.is_none() {
            return Err("prediction carries neither detector_score nor retrieved_source".into());
        }
        if let Some(s) = self.detector_score {
            if !(0.0..=1.0).contains(&s) {
                return Err(format!("detector_score {s} outside [0, 1]"));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Resolution {
    Matched(SourceId),
    Unmatched,
}

/// Resolves a generated name to a source: normalized equality, then equal
/// last words, then whole-word containment either way. Ties go to the source
/// listed first (sources are ordered by first mention).
pub fn resolve_retrieved_name(raw: &str, sources: &[Source]) -> Resolution {
    let needle = text::normalize_name(raw);
    if needle.is_empty() {
        return Resolution::Unmatched;
    }
    let keys: Vec<(SourceId, String)> = sources
        .iter()
        .filter(|s| !s.is_passive)
        .map(|s| (s.source_id, text::normalize_name(&s.canonical_name)))
        .filter(|(_, k)| !k.is_empty())
        .collect();
    let stages: [&dyn Fn(&str) -> bool; 3] = [
        &|k| k == needle,
        &|k| text::last_word(k) == text::last_word(&needle),
        &|k| text::contains_words(k, &needle) || text::contains_words(&needle, k),
    ];
    for stage in stages {
        if let Some((id, _)) = keys.iter().find(|(_, k)| stage(k)) {
            return Resolution::Matched(*id);
        }
    }
    Resolution::Unmatched
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum Provenance {
    File,
    Endpoint,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ResolvedAttribution {
    pub sentence: usize,
    pub raw: String,
    pub resolution: Resolution,
    pub provenance: Provenance,
}

/// `<article> To which source can we attribute the sentence <sentence>?`
pub fn build_retrieval_prompt(doc: &Document, sentence_index: usize) -> Result<String> {
    let sentence = doc.sentences.get(sentence_index).ok_or(Error::Range {
        index: sentence_index,
        n_sentences: doc.len(),
    })?;
    Ok(format!(
        "{} {}",
        doc.article_text(),
        question(&sentence.text)
    ))
}

fn question(sentence: &str) -> String {
    format!("To which source can we attribute the sentence {sentence}?")
}

/// Builds a prompt with the configured demonstrations and length cap. The
/// flag is true when the article had to be truncated.
pub fn build_prompt(doc: &Document, sentence_index: usize, cfg: &PipelineConfig) -> Result<(String, bool)> {
    let base = build_retrieval_prompt(doc, sentence_index)?;
    let prefix: String = cfg
        .prefix_examples
        .iter()
        .map(|(s, q)| format!("{} {q}\n", question(s)))
        .collect();
    let prompt = format!("{prefix}{base}");
    let Some(max) = cfg.max_prompt_chars else {
        return Ok((prompt, false));
    };
    let total = prompt.chars().count();
    if total <= max {
        return Ok((prompt, false));
    }
    // Keep the question intact and drop characters from the start of the article.
    let tail = format!(" {}", question(&doc.sentences[sentence_index].text));
    let article = doc.article_text();
    let budget = max.saturating_sub(prefix.chars().count() + tail.chars().count());
    let n = article.chars().count();
    let kept: String = article.chars().skip(n.saturating_sub(budget)).collect();
    log::warn!(
        "prompt for {}@{} sentence {sentence_index} truncated from {total} to {max} characters",
        doc.doc_id,
        doc.version_id
    );
    Ok((format!("{prefix}{kept}{tail}"), true))
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SentenceError {
    pub sentence: usize,
    pub message: String,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PipelineOutput {
    pub attribution: DocumentAttribution,
    pub resolved: Vec<ResolvedAttribution>,
    pub errors: Vec<SentenceError>,
}

/// Combines detection and retrieval predictions for one document.
///
/// `sources` is the document's canonicalized source list. Names that match
/// none of them become new sources named by the generated string. In
/// `Pipeline` mode a null answer on a detected sentence attributes it to an
/// unnamed (passive) source; in `PipelinePlusNones` it leaves the sentence
/// unattributed.
pub fn compose_pipeline(
    doc: &Document,
    sources: &[Source],
    predictions: &[Prediction],
    provenance: Provenance,
    cfg: &PipelineConfig,
) -> PipelineOutput {
    let mut by_sentence: BTreeMap<usize, (Option<f64>, Option<&str>)> = BTreeMap::new();
    for p in predictions.iter().filter(|p| p.doc_id == doc.doc_id) {
        let slot = by_sentence.entry(p.sentence_index).or_default();
        if p.detector_score.is_some() {
            slot.0 = p.detector_score;
        }
        if let Some(r) = &p.retrieved_source {
            slot.1 = Some(r.as_str());
        }
    }

    let mut attribution = DocumentAttribution {
        sources: sources.to_vec(),
        ..DocumentAttribution::empty(doc)
    };
    let mut next_id = sources.iter().map(|s| s.source_id + 1).max().unwrap_or(0);
    let mut new_ids: BTreeMap<String, SourceId> = BTreeMap::new();
    let mut passive_id = None;
    let mut resolved = Vec::new();
    let mut errors = Vec::new();

    for (&sentence, _) in by_sentence.range(doc.len()..) {
        errors.push(SentenceError {
            sentence,
            message: format!("prediction for sentence {sentence} beyond document end"),
        });
    }
    for i in 0..doc.len() {
        let (score, retrieved) = by_sentence.get(&i).copied().unwrap_or_default();
        let Some(score) = score else {
            errors.push(SentenceError {
                sentence: i,
                message: "missing detector score".into(),
            });
            continue;
        };
        if score < cfg.detection_threshold {
            continue;
        }
        let Some(raw) = retrieved else {
            errors.push(SentenceError {
                sentence: i,
                message: "detected sentence has no retrieved source".into(),
            });
            continue;
        };
        if is_null_answer(raw) {
            if cfg.mode == PipelineMode::Pipeline {
                let id = *passive_id.get_or_insert_with(|| {
                    let id = next_id;
                    next_id += 1;
                    attribution.sources.push(Source::passive(id));
                    id
                });
                attribution.map.insert(i, id, InformationChannel::Other);
            }
            resolved.push(ResolvedAttribution {
                sentence: i,
                raw: raw.to_owned(),
                resolution: Resolution::Unmatched,
                provenance,
            });
            continue;
        }
        let resolution = resolve_retrieved_name(raw, sources);
        let id = match resolution {
            Resolution::Matched(id) => id,
            Resolution::Unmatched => {
                let key = text::normalize_name(raw);
                let key = if key.is_empty() { raw.trim().to_owned() } else { key };
                *new_ids.entry(key).or_insert_with(|| {
                    let id = next_id;
                    next_id += 1;
                    attribution.sources.push(Source {
                        source_id: id,
                        canonical_name: raw.trim().to_owned(),
                        mentions: Vec::new(),
                        is_passive: false,
                    });
                    id
                })
            }
        };
        if attribution.source(id).is_some_and(|s| !s.canonical_name.trim().is_empty()) {
            attribution.map.insert(i, id, InformationChannel::Other);
        } else {
            errors.push(SentenceError {
                sentence: i,
                message: format!("retrieved source {raw:?} is blank"),
            });
            attribution.sources.retain(|s| s.source_id != id);
        }
        resolved.push(ResolvedAttribution {
            sentence: i,
            raw: raw.to_owned(),
            resolution,
            provenance,
        });
    }
    attribution.prune_unused();
    PipelineOutput {
        attribution,
        resolved,
        errors,
    }
}

#[derive(Serialize)]
struct EndpointRequest<'a> {
    prompts: &'a [String],
}

#[derive(Deserialize)]
struct EndpointResponse {
    completions: Vec<String>,
}

/// Blocking client for a completion endpoint that accepts
/// `{"prompts": [...]}` and answers `{"completions": [...]}`.
pub struct EndpointClient {
    cfg: EndpointConfig,
    token: String,
    agent: ureq::Agent,
}

enum Attempt {
    Done(Vec<String>),
    Retry(String),
    Fail(String),
}

impl EndpointClient {
    /// Fails before any request when the token variable is unset or empty.
    pub fn new(cfg: EndpointConfig) -> Result<Self> {
        let token = std::env::var(&cfg.token_env)
            .ok()
            .filter(|t| !t.is_empty())
            .ok_or_else(|| Error::Config(format!("endpoint token variable {} is not set", cfg.token_env)))?;
        let agent = ureq::Agent::config_builder()
            .timeout_global(Some(cfg.timeout))
            .http_status_as_error(false)
            .build()
            .into();
        Ok(Self { cfg, token, agent })
    }

    fn post_once(&self, prompts: &[String]) -> Attempt {
        let sent = self
            .agent
            .post(&self.cfg.url)
            .header("Authorization", format!("Bearer {}", self.token))
            .send_json(EndpointRequest { prompts });
        let mut resp = match sent {
            Ok(r) => r,
            Err(e) => return Attempt::Retry(format!("request failed: {e}")),
        };
        let status = resp.status().as_u16();
        match status {
            200..=299 => match resp.body_mut().read_json::<EndpointResponse>() {
                Ok(body) if body.completions.len() == prompts.len() => Attempt::Done(body.completions),
                Ok(body) => Attempt::Fail(format!(
                    "expected {} completions, received {}",
                    prompts.len(),
                    body.completions.len()
                )),
                Err(e) => Attempt::Fail(format!("malformed response body: {e}")),
            },
            429 | 500..=599 => Attempt::Retry(format!("HTTP {status}")),
            401 | 403 => Attempt::Fail(format!("HTTP {status}: authorization rejected")),
            _ => Attempt::Fail(format!("HTTP {status}")),
        }
    }

    fn post(&self, prompts: &[String]) -> Result<Vec<String>> {
        let mut delay = self.cfg.backoff;
        let mut last = String::new();
        for attempt in 0..=self.cfg.retries {
            if attempt > 0 {
                std::thread::sleep(delay);
                delay = delay.saturating_mul(2);
            }
            match self.post_once(prompts) {
                Attempt::Done(c) => return Ok(c),
                Attempt::Fail(m) => return Err(Error::Endpoint(m)),
                Attempt::Retry(m) => {
                    log::debug!("endpoint attempt {} failed: {m}", attempt + 1);
                    last = m;
                }
            }
        }
        Err(Error::Endpoint(format!("gave up after {} attempts: {last}", self.cfg.retries + 1)))
    }

    /// One completion per prompt, in prompt order. Each prompt is its own
    /// request, so a failing item never aborts the others.
    pub fn query(&self, prompts: &[String]) -> Vec<Result<String>> {
        let slots: Vec<Mutex<Option<Result<String>>>> = prompts.iter().map(|_| Mutex::new(None)).collect();
        let next = AtomicUsize::new(0);
        let workers = self.cfg.parallelism.clamp(1, prompts.len().max(1));
        std::thread::scope(|scope| {
            for _ in 0..workers {
                scope.spawn(|| loop {
                    let i = next.fetch_add(1, Ordering::Relaxed);
                    let Some(prompt) = prompts.get(i) else { break };
                    let out = self
                        .post(std::slice::from_ref(prompt))
                        .map(|mut c| c.pop().unwrap_or_default());
                    *slots[i].lock().unwrap() = Some(out);
                });
            }
        });
        slots
            .into_iter()
            .map(|m| m.into_inner().unwrap().expect("every slot is filled"))
            .collect()
    }

    /// Posts an empty batch and expects an empty completion list back.
    pub fn health_check(&self) -> Result<()> {
        self.post(&[]).map(|_| ())
    }
}
