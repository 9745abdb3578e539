//! Data-engineering toolkit for chunk-level speech-text interleaving.
//!
//! The crate covers the non-neural machinery of an interleaved
//! chain-of-modality pipeline for speech LLMs built on discrete speech
//! tokens:
//!
//! - [`codec`] — run-length merging and expansion of speech token sequences
//! - [`ctc`] — CTC forced alignment and temporal boundary extraction
//! - [`chunk`] — punctuation-based text chunking and speech-span assignment
//! - [`interleave`] — rendering and parsing of the interleaved markup
//! - [`duration`] — a small trainable repeat-count predictor
//! - [`schedule`] — a discrete-event simulator for generation/playback overlap
//! - [`metrics`] — error rates, off-target ratio, representation similarity
//! - [`corpus`] — JSONL manifests, emission files, and synthetic corpora
//!
//! Everything operates on plain data at desk scale; acoustic encoders, the
//! LLM itself, and real datasets live outside this crate.

use serde::{Deserialize, Serialize};

pub mod chunk;
pub mod codec;
pub mod corpus;
pub mod ctc;
pub mod duration;
pub mod interleave;
pub mod metrics;
pub mod schedule;

/// Language of a text, used by the chunker, the corpus generator, and the
/// off-target metric.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Language {
    En,
    Zh,
}

impl std::fmt::Display for Language {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Language::En => write!(f, "en"),
            Language::Zh => write!(f, "zh"),
        }
    }
}

impl std::str::FromStr for Language {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "en" => Ok(Language::En),
            "zh" => Ok(Language::Zh),
            other => Err(format!("unknown language: {other:?} (expected en or zh)")),
        }
    }
}
