use std::path::PathBuf;

use anyhow::{anyhow, bail, Context, Result};
use clap::Args;
use serde::Serialize;
use speechweave_core::chunk::{assign_speech_spans, segment_text, ChunkingConfig};
use speechweave_core::codec::SpeechTokenSequence;
use speechweave_core::corpus::{read_manifest, ManifestRecord};
use speechweave_core::ctc::TokenBoundaries;
use speechweave_core::interleave::{
    render_full_com, render_interleaved, validate_response_markup, ConversationPair,
    InstructionTemplateBank, InterleavedExample, Task,
};

use crate::commands::map_records;
use crate::config::PipelineConfig;

#[derive(Clone, Copy, PartialEq, Eq, clap::ValueEnum)]
pub enum BuildMode {
    Interleaved,
    FullCom,
}

#[derive(Args)]
pub struct BuildArgs {
    #[arg(long)]
    pub manifest: PathBuf,
    /// Output JSONL of rendered examples.
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long, value_enum, default_value = "interleaved")]
    pub mode: BuildMode,
    /// Include the transcribed question before the answer.
    #[arg(long)]
    pub include_tq: bool,
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Minimum words per chunk before a punctuation cut is taken.
    #[arg(long)]
    pub min_words: Option<usize>,
    /// Seed for instruction sampling.
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub strict: bool,
    #[arg(long, default_value_t = 0)]
    pub jobs: usize,
    /// Write the summary report here instead of stdout.
    #[arg(long)]
    pub report: Option<PathBuf>,
}

#[derive(Serialize)]
struct BuiltExample {
    id: String,
    #[serde(flatten)]
    example: InterleavedExample,
}

#[derive(Serialize)]
struct BuildReport {
    built: usize,
    skipped: usize,
    skipped_records: Vec<SkippedRecord>,
}

#[derive(Serialize)]
struct SkippedRecord {
    id: String,
    reason: String,
}

fn pair_from_record(record: &ManifestRecord, min_words: usize) -> Result<ConversationPair> {
    let question_text = record
        .extra
        .get("question_text")
        .and_then(|v| v.as_str())
        .context("record has no question_text")?
        .to_string();
    let question_tokens: Vec<u32> = record
        .extra
        .get("question_tokens")
        .and_then(|v| serde_json::from_value(v.clone()).ok())
        .context("record has no question_tokens")?;
    let boundaries = record
        .boundaries
        .clone()
        .context("record has no boundaries; run align first")?;

    let mut chunk_cfg = ChunkingConfig::new(record.language);
    chunk_cfg.min_words = min_words;
    let chunks = segment_text(&record.text, &chunk_cfg)?;
    let chunks = assign_speech_spans(
        &chunks,
        &TokenBoundaries { spans: boundaries },
        record.speech_tokens.len(),
    )?;

    // Question tokens ride on the same vocabulary as the answer tokens.
    let vocab = record
        .speech_tokens
        .iter()
        .chain(&question_tokens)
        .max()
        .map_or(crate_default_vocab(), |&m| m + 1)
        .max(crate_default_vocab());
    Ok(ConversationPair {
        question_text,
        question_tokens: SpeechTokenSequence::with_vocab(question_tokens, vocab)?,
        answer_text: record.text.clone(),
        answer_tokens: SpeechTokenSequence::with_vocab(record.speech_tokens.clone(), vocab)?,
        answer_chunks: chunks,
    })
}

fn crate_default_vocab() -> u32 {
    speechweave_core::codec::DEFAULT_VOCAB_SIZE
}

fn build_record(
    record: &ManifestRecord,
    mode: BuildMode,
    include_tq: bool,
    min_words: usize,
    bank: &InstructionTemplateBank,
    seed: u64,
    index: usize,
) -> Result<BuiltExample> {
    let pair = pair_from_record(record, min_words)?;
    let language = record.language.to_string();
    let instruction =
        bank.sample_instruction(Task::S2s, &language, seed.wrapping_add(index as u64))?;
    let example = match mode {
        BuildMode::Interleaved => render_interleaved(&pair, include_tq, instruction)?,
        BuildMode::FullCom => render_full_com(&pair, include_tq, instruction)?,
    };
    // Rendered markup must parse back cleanly before it is written out.
    validate_response_markup(&example.response)
        .map_err(|e| anyhow!("rendered markup failed validation: {e}"))?;
    Ok(BuiltExample {
        id: record.id.clone(),
        example,
    })
}

pub fn run(args: BuildArgs) -> Result<()> {
    let pipeline = PipelineConfig::load(args.config.as_deref())?;
    let min_words = args.min_words.or(pipeline.min_words).unwrap_or(7);
    let seed = args.seed.or(pipeline.seed).unwrap_or(0);
    let records = read_manifest(&args.manifest)?;
    let bank = InstructionTemplateBank::default();

    let results = map_records(
        records.into_iter().enumerate().collect(),
        args.jobs,
        |(index, record)| {
            let id = record.id.clone();
            let built = build_record(
                &record,
                args.mode,
                args.include_tq,
                min_words,
                &bank,
                seed,
                index,
            );
            (id, built)
        },
    )?;

    let mut lines = Vec::new();
    let mut built = 0usize;
    let mut skipped_records = Vec::new();
    for (id, result) in results {
        match result {
            Ok(example) => {
                // Canonical key order, one example per line.
                let value = serde_json::to_value(&example)?;
                lines.push(serde_json::to_string(&value)?);
                built += 1;
            }
            Err(err) => {
                if args.strict {
                    bail!("record {id}: {err:#}");
                }
                skipped_records.push(SkippedRecord {
                    id,
                    reason: format!("{err:#}"),
                });
            }
        }
    }
    let mut payload = lines.join("\n");
    if !payload.is_empty() {
        payload.push('\n');
    }
    std::fs::write(&args.out, payload)
        .with_context(|| format!("writing {}", args.out.display()))?;

    let report = BuildReport {
        built,
        skipped: skipped_records.len(),
        skipped_records,
    };
    crate::output::emit(&report, args.report.as_deref())
}
