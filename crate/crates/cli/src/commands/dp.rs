use std::path::PathBuf;

use anyhow::{Context, Result};
use clap::Args;
use serde::Serialize;
use speechweave_core::codec::{merge_runs, SpeechTokenSequence};
use speechweave_core::corpus::{
    load_duration_model, read_manifest, save_duration_model, ManifestRecord,
};
use speechweave_core::duration::{DurationExample, DurationModel};

use crate::config::PipelineConfig;
use crate::output;

#[derive(Args)]
pub struct TrainDpArgs {
    #[arg(long)]
    pub manifest: PathBuf,
    /// Where the trained parameters are written (versioned JSON).
    #[arg(long)]
    pub params_out: PathBuf,
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long)]
    pub epochs: Option<usize>,
    #[arg(long)]
    pub learning_rate: Option<f64>,
    #[arg(long)]
    pub batch_size: Option<usize>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub vocab_size: Option<u32>,
    /// Write the training report here instead of stdout.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Args)]
pub struct PredictDpArgs {
    #[arg(long)]
    pub params: PathBuf,
    #[arg(long)]
    pub manifest: PathBuf,
    /// Output JSONL of per-record predictions.
    #[arg(long)]
    pub out: PathBuf,
    /// Write the summary report here instead of stdout.
    #[arg(long)]
    pub report: Option<PathBuf>,
}

fn duration_dataset(records: &[ManifestRecord]) -> Result<Vec<DurationExample>> {
    let mut dataset = Vec::with_capacity(records.len());
    for record in records {
        let vocab = record.speech_tokens.iter().max().map_or(1, |&m| m + 1);
        let seq = SpeechTokenSequence::with_vocab(record.speech_tokens.clone(), vocab)?;
        let merged = merge_runs(&seq)?;
        if merged.runs.is_empty() {
            continue;
        }
        dataset.push(DurationExample {
            tokens: merged.run_tokens(),
            counts: merged.run_counts(),
        });
    }
    Ok(dataset)
}

pub fn run_train(args: TrainDpArgs) -> Result<()> {
    let pipeline = PipelineConfig::load(args.config.as_deref())?;
    let records = read_manifest(&args.manifest)?;
    let dataset = duration_dataset(&records)?;

    let configured = pipeline.duration_model.is_some();
    let mut model_cfg = pipeline.duration_model.unwrap_or_default();
    if let Some(v) = args.vocab_size {
        model_cfg.vocab_size = v;
    } else if !configured {
        // Size the embedding to the corpus rather than the full default
        // vocabulary when nothing was configured.
        let max_token = dataset
            .iter()
            .flat_map(|e| e.tokens.iter())
            .max()
            .copied()
            .unwrap_or(0);
        model_cfg.vocab_size = max_token + 1;
    }
    let mut train_cfg = pipeline.duration_training.unwrap_or_default();
    if let Some(v) = args.epochs {
        train_cfg.epochs = v;
    }
    if let Some(v) = args.learning_rate {
        train_cfg.learning_rate = v;
    }
    if let Some(v) = args.batch_size {
        train_cfg.batch_size = v;
    }
    if let Some(v) = args.seed.or(pipeline.seed) {
        train_cfg.seed = v;
    }

    let (model, report) = DurationModel::train(&dataset, model_cfg, &train_cfg)?;
    save_duration_model(&args.params_out, &model)?;
    output::emit(&report, args.out.as_deref())
}

#[derive(Serialize)]
struct Prediction {
    id: String,
    predicted_counts: Vec<u32>,
    expanded_length: usize,
}

#[derive(Serialize)]
struct PredictReport {
    records: usize,
    /// Mean |predicted expanded length - true expanded length| over records
    /// that carry true counts.
    mean_abs_length_error: Option<f64>,
}

pub fn run_predict(args: PredictDpArgs) -> Result<()> {
    let model = load_duration_model(&args.params)?;
    let records = read_manifest(&args.manifest)?;

    let mut lines = Vec::with_capacity(records.len());
    let mut error_sum = 0.0f64;
    let mut error_count = 0usize;
    for record in &records {
        let vocab = record.speech_tokens.iter().max().map_or(1, |&m| m + 1);
        let seq = SpeechTokenSequence::with_vocab(record.speech_tokens.clone(), vocab)?;
        let merged = merge_runs(&seq)?;
        let predicted = model.predict_counts(&merged.run_tokens())?;
        let expanded_length: usize = predicted.iter().map(|&c| c as usize).sum();
        if !record.speech_tokens.is_empty() {
            error_sum += (expanded_length as f64 - record.speech_tokens.len() as f64).abs();
            error_count += 1;
        }
        let prediction = Prediction {
            id: record.id.clone(),
            predicted_counts: predicted,
            expanded_length,
        };
        lines.push(serde_json::to_string(&serde_json::to_value(&prediction)?)?);
    }
    let mut payload = lines.join("\n");
    if !payload.is_empty() {
        payload.push('\n');
    }
    std::fs::write(&args.out, payload)
        .with_context(|| format!("writing {}", args.out.display()))?;

    let report = PredictReport {
        records: records.len(),
        mean_abs_length_error: (error_count > 0).then(|| error_sum / error_count as f64),
    };
    output::emit(&report, args.report.as_deref())
}
