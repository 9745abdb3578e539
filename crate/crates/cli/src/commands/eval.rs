use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use clap::{Args, Subcommand};
use serde::{Deserialize, Serialize};
use speechweave_core::metrics::{
    edit_distance_rate, off_target_ratio, similarity_report, EditUnit, Normalization,
};
use speechweave_core::Language;

use crate::output;

#[derive(Args)]
pub struct EvalArgs {
    #[command(subcommand)]
    pub kind: EvalKind,
}

#[derive(Subcommand)]
pub enum EvalKind {
    /// Word or character error rate over {reference, hypothesis} JSONL.
    Er(ErArgs),
    /// Off-target language ratio over {response} JSONL.
    Offtarget(OfftargetArgs),
    /// Representation similarity over two vector files.
    Sim(SimArgs),
}

#[derive(Clone, Copy, PartialEq, Eq, clap::ValueEnum)]
pub enum UnitArg {
    Word,
    Character,
}

#[derive(Clone, Copy, PartialEq, Eq, clap::ValueEnum)]
pub enum NormalizationArg {
    None,
    Default,
}

#[derive(Args)]
pub struct ErArgs {
    #[arg(long)]
    pub input: PathBuf,
    #[arg(long, value_enum, default_value = "word")]
    pub unit: UnitArg,
    #[arg(long, value_enum, default_value = "default")]
    pub normalization: NormalizationArg,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Args)]
pub struct OfftargetArgs {
    #[arg(long)]
    pub input: PathBuf,
    /// Intended language for records that do not carry their own.
    #[arg(long)]
    pub intended: Option<Language>,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Args)]
pub struct SimArgs {
    /// JSONL file, one JSON number array per line.
    #[arg(long)]
    pub vectors_a: PathBuf,
    #[arg(long)]
    pub vectors_b: PathBuf,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

fn read_jsonl<T: serde::de::DeserializeOwned>(path: &Path) -> Result<Vec<T>> {
    let data =
        std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    let mut items = Vec::new();
    for (index, line) in data.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let item: T = serde_json::from_str(line)
            .with_context(|| format!("{}:{}: malformed line", path.display(), index + 1))?;
        items.push(item);
    }
    Ok(items)
}

#[derive(Deserialize)]
struct ErRecord {
    reference: String,
    hypothesis: String,
}

#[derive(Serialize)]
struct ErReport {
    records: usize,
    substitutions: usize,
    insertions: usize,
    deletions: usize,
    reference_length: usize,
    /// Corpus-level rate: total edits over total reference length.
    rate: f64,
}

fn run_er(args: ErArgs) -> Result<()> {
    let unit = match args.unit {
        UnitArg::Word => EditUnit::Word,
        UnitArg::Character => EditUnit::Character,
    };
    let normalization = match args.normalization {
        NormalizationArg::None => Normalization::None,
        NormalizationArg::Default => Normalization::Default,
    };
    let records: Vec<ErRecord> = read_jsonl(&args.input)?;
    if records.is_empty() {
        bail!("{}: no records", args.input.display());
    }
    let mut report = ErReport {
        records: records.len(),
        substitutions: 0,
        insertions: 0,
        deletions: 0,
        reference_length: 0,
        rate: 0.0,
    };
    for (index, record) in records.iter().enumerate() {
        let r = edit_distance_rate(&record.reference, &record.hypothesis, unit, normalization)
            .with_context(|| format!("{}:{}", args.input.display(), index + 1))?;
        report.substitutions += r.substitutions;
        report.insertions += r.insertions;
        report.deletions += r.deletions;
        report.reference_length += r.reference_length;
    }
    report.rate = (report.substitutions + report.insertions + report.deletions) as f64
        / report.reference_length as f64;
    output::emit(&report, args.out.as_deref())
}

#[derive(Deserialize)]
struct ResponseRecord {
    response: String,
    intended_lang: Option<Language>,
}

fn run_offtarget(args: OfftargetArgs) -> Result<()> {
    let records: Vec<ResponseRecord> = read_jsonl(&args.input)?;
    if records.is_empty() {
        bail!("{}: no records", args.input.display());
    }
    // Group by intended language so each group runs through the metric.
    let mut en = Vec::new();
    let mut zh = Vec::new();
    for (index, record) in records.into_iter().enumerate() {
        let intended = record.intended_lang.or(args.intended).with_context(|| {
            format!(
                "{}:{}: record has no intended_lang and --intended was not given",
                args.input.display(),
                index + 1
            )
        })?;
        match intended {
            Language::En => en.push(record.response),
            Language::Zh => zh.push(record.response),
        }
    }
    let mut total = 0usize;
    let mut off = 0usize;
    for (language, responses) in [(Language::En, en), (Language::Zh, zh)] {
        if responses.is_empty() {
            continue;
        }
        let r = off_target_ratio(&responses, language)?;
        total += r.total;
        off += r.off_target_count;
    }
    let report = speechweave_core::metrics::OffTargetReport {
        total,
        off_target_count: off,
        ratio_percent: 100.0 * off as f64 / total as f64,
    };
    output::emit(&report, args.out.as_deref())
}

fn run_sim(args: SimArgs) -> Result<()> {
    let a: Vec<Vec<f64>> = read_jsonl(&args.vectors_a)?;
    let b: Vec<Vec<f64>> = read_jsonl(&args.vectors_b)?;
    let report = similarity_report(&a, &b, args.seed)?;
    output::emit(&report, args.out.as_deref())
}

pub fn run(args: EvalArgs) -> Result<()> {
    match args.kind {
        EvalKind::Er(a) => run_er(a),
        EvalKind::Offtarget(a) => run_offtarget(a),
        EvalKind::Sim(a) => run_sim(a),
    }
}
