//! Sentence-level source attribution for news articles.
//!
//! The crate covers the whole batch workflow: reading annotated corpora,
//! attributing sentences with rule baselines or externally produced model
//! predictions, scoring attributions against gold labels per information
//! channel, computing corpus sourcing statistics, and building source
//! compositionality probe datasets.

pub mod analytics;
pub mod error;
pub mod eval;
pub mod fixtures;
pub mod io;
pub mod lexicon;
pub mod model;
pub mod neural;
pub mod parallel;
pub mod probes;
pub mod rules;
pub mod synthetic;
pub mod text;

pub use error::{Error, Result, ValidationError};
pub use lexicon::{Lexicons, PatternSet, SignifierLexicon, SpeakingVerbLexicon};
pub use model::{
    Attribution, AttributionMap, Document, DocumentAttribution, GoldLabel, InformationChannel, Mention, Sentence,
    Source, SourceId, Token, Topic,
};
