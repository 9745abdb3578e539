use std::path::{Path, PathBuf};

use anyhow::{bail, Result};
use clap::Args;
use serde::Serialize;
use speechweave_core::chunk::count_words;
use speechweave_core::codec::{merge_runs, SpeechTokenSequence};
use speechweave_core::corpus::read_manifest;
use speechweave_core::schedule::{compare_modes, ModeComparison, PairTotals, RateModel};

use crate::config::PipelineConfig;
use crate::output;

#[derive(Clone, Copy, PartialEq, Eq, clap::ValueEnum)]
pub enum ReportFormat {
    Json,
    Table,
}

#[derive(Args)]
pub struct SimulateArgs {
    /// Derive per-record totals from a manifest.
    #[arg(long, conflicts_with_all = ["text_tokens", "speech_merged", "speech_expanded"])]
    pub manifest: Option<PathBuf>,
    #[arg(long)]
    pub text_tokens: Option<usize>,
    #[arg(long)]
    pub speech_merged: Option<usize>,
    #[arg(long)]
    pub speech_expanded: Option<usize>,
    #[arg(long, default_value_t = 0)]
    pub tq_tokens: usize,
    /// Text tokens per chunk.
    #[arg(long, default_value_t = 7)]
    pub chunk_size: usize,
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long)]
    pub text_rate: Option<f64>,
    #[arg(long)]
    pub speech_rate: Option<f64>,
    #[arg(long)]
    pub synth_rate: Option<f64>,
    #[arg(long)]
    pub playback_rate: Option<f64>,
    #[arg(long, value_enum, default_value = "json")]
    pub format: ReportFormat,
    /// Write the report here instead of stdout.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Serialize)]
struct UtteranceReport {
    id: String,
    #[serde(flatten)]
    comparison: ModeComparison,
}

#[derive(Serialize)]
struct SimulateReport {
    chunk_size: usize,
    rates: RateModel,
    utterances: Vec<UtteranceReport>,
    /// Corpus-sum latencies and their ratio; equals the single utterance's
    /// numbers when only one is simulated.
    total_latency_interleaved: f64,
    total_latency_full_com: f64,
    speedup: f64,
    mean_latency_interleaved: f64,
    mean_latency_full_com: f64,
    total_stalls_interleaved: usize,
    total_stalls_full_com: usize,
}

fn rates_from(args: &SimulateArgs, pipeline: &PipelineConfig) -> RateModel {
    let mut rates = pipeline.rates.unwrap_or_default();
    if let Some(v) = args.text_rate {
        rates.seconds_per_text_token = v;
    }
    if let Some(v) = args.speech_rate {
        rates.seconds_per_speech_token = v;
    }
    if let Some(v) = args.synth_rate {
        rates.synth_seconds_per_token = v;
    }
    if let Some(v) = args.playback_rate {
        rates.playback_seconds_per_token = v;
    }
    rates
}

fn totals_from_manifest(path: &Path) -> Result<Vec<(String, PairTotals)>> {
    let records = read_manifest(path)?;
    let mut totals = Vec::with_capacity(records.len());
    for record in records {
        let vocab = record.speech_tokens.iter().max().map_or(1, |&m| m + 1);
        let seq = SpeechTokenSequence::with_vocab(record.speech_tokens.clone(), vocab)?;
        let merged = merge_runs(&seq)?;
        let question_text_tokens = record
            .extra
            .get("question_text")
            .and_then(|v| v.as_str())
            .map(|q| count_words(q, record.language))
            .unwrap_or(0);
        totals.push((
            record.id,
            PairTotals {
                question_text_tokens,
                answer_text_tokens: count_words(&record.text, record.language).max(1),
                speech_tokens_merged: merged.runs.len().max(1),
                speech_tokens_expanded: record.speech_tokens.len().max(1),
            },
        ));
    }
    Ok(totals)
}

fn render_table(report: &SimulateReport) -> String {
    let mut out = String::new();
    out.push_str(&format!(
        "{:<14} {:>12} {:>12} {:>10} {:>8}\n",
        "Mode", "Latency(s)", "Mean(s)", "Speedup", "Stalls"
    ));
    out.push_str(&format!(
        "{:<14} {:>12.3} {:>12.3} {:>10} {:>8}\n",
        "interleaved",
        report.total_latency_interleaved,
        report.mean_latency_interleaved,
        format!("x{:.2}", report.speedup),
        report.total_stalls_interleaved,
    ));
    out.push_str(&format!(
        "{:<14} {:>12.3} {:>12.3} {:>10} {:>8}",
        "full_com",
        report.total_latency_full_com,
        report.mean_latency_full_com,
        "x1.00",
        report.total_stalls_full_com,
    ));
    out
}

pub fn run(args: SimulateArgs) -> Result<()> {
    let pipeline = PipelineConfig::load(args.config.as_deref())?;
    let rates = rates_from(&args, &pipeline);

    let totals: Vec<(String, PairTotals)> = match (&args.manifest, args.text_tokens) {
        (Some(path), _) => totals_from_manifest(path)?,
        (None, Some(text_tokens)) => {
            let merged = match (args.speech_merged, args.speech_expanded) {
                (Some(m), _) => m,
                (None, Some(e)) => e,
                (None, None) => bail!("provide --speech-merged or --speech-expanded"),
            };
            let expanded = args.speech_expanded.unwrap_or(merged);
            vec![(
                "utterance".to_string(),
                PairTotals {
                    question_text_tokens: args.tq_tokens,
                    answer_text_tokens: text_tokens,
                    speech_tokens_merged: merged,
                    speech_tokens_expanded: expanded,
                },
            )]
        }
        (None, None) => bail!("provide --manifest or --text-tokens with speech totals"),
    };

    let mut utterances = Vec::with_capacity(totals.len());
    let mut sum_interleaved = 0.0;
    let mut sum_full = 0.0;
    let mut stalls_interleaved = 0usize;
    let mut stalls_full = 0usize;
    for (id, t) in totals {
        let comparison = compare_modes(&t, &rates, args.chunk_size)?;
        sum_interleaved += comparison.latency_interleaved;
        sum_full += comparison.latency_full_com;
        stalls_interleaved += comparison.stalls_interleaved.len();
        stalls_full += comparison.stalls_full_com.len();
        utterances.push(UtteranceReport { id, comparison });
    }
    let n = utterances.len().max(1) as f64;
    let report = SimulateReport {
        chunk_size: args.chunk_size,
        rates,
        total_latency_interleaved: sum_interleaved,
        total_latency_full_com: sum_full,
        speedup: if sum_full == sum_interleaved {
            1.0
        } else {
            sum_full / sum_interleaved
        },
        mean_latency_interleaved: sum_interleaved / n,
        mean_latency_full_com: sum_full / n,
        total_stalls_interleaved: stalls_interleaved,
        total_stalls_full_com: stalls_full,
        utterances,
    };

    match args.format {
        ReportFormat::Json => output::emit(&report, args.out.as_deref()),
        ReportFormat::Table => output::emit_text(&render_table(&report), args.out.as_deref()),
    }
}
