use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use clap::Args;
use serde::Serialize;
use speechweave_core::chunk::count_words;
use speechweave_core::corpus::{read_emissions, read_manifest, write_manifest, ManifestRecord};
use speechweave_core::ctc::{
    force_align, map_frames_to_token_indices, token_boundaries, LabelSequence,
};

use crate::commands::map_records;
use crate::output;

#[derive(Args)]
pub struct AlignArgs {
    #[arg(long)]
    pub manifest: PathBuf,
    /// Output manifest with boundaries filled in.
    #[arg(long)]
    pub out: PathBuf,
    /// Abort on the first record that cannot be aligned instead of
    /// skipping it.
    #[arg(long)]
    pub strict: bool,
    /// Worker threads (0 = one per core).
    #[arg(long, default_value_t = 0)]
    pub jobs: usize,
    /// Write the summary report here instead of stdout.
    #[arg(long)]
    pub report: Option<PathBuf>,
}

#[derive(Serialize)]
struct AlignReport {
    aligned: usize,
    skipped: usize,
    skipped_records: Vec<SkippedRecord>,
}

#[derive(Serialize)]
struct SkippedRecord {
    id: String,
    reason: String,
}

fn align_record(manifest_path: &Path, mut record: ManifestRecord) -> Result<ManifestRecord> {
    let reference = record
        .emissions_ref
        .as_deref()
        .context("record has no emissions_ref")?;
    let path = output::resolve_ref(manifest_path, reference);
    let emissions = read_emissions(&path)?;
    let n_words = count_words(&record.text, record.language);
    if n_words == 0 {
        bail!("record has no countable words");
    }
    // Alignment labels are word positions shifted past the blank at 0.
    let labels = LabelSequence::new((1..=n_words).collect())?;
    let path = force_align(&emissions, &labels)?;
    let frame_spans = token_boundaries(&path, &labels, emissions.blank())?;
    let token_spans = map_frames_to_token_indices(
        &frame_spans,
        emissions.frames(),
        record.speech_tokens.len().max(1),
    )?;
    record.boundaries = Some(token_spans.spans);
    Ok(record)
}

pub fn run(args: AlignArgs) -> Result<()> {
    let records = read_manifest(&args.manifest)?;
    let manifest_path = args.manifest.clone();
    let results = map_records(records, args.jobs, |record| {
        let id = record.id.clone();
        (id, align_record(&manifest_path, record))
    })?;

    let mut aligned = Vec::new();
    let mut skipped_records = Vec::new();
    for (id, result) in results {
        match result {
            Ok(record) => aligned.push(record),
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
    write_manifest(&aligned, &args.out)?;
    let report = AlignReport {
        aligned: aligned.len(),
        skipped: skipped_records.len(),
        skipped_records,
    };
    output::emit(&report, args.report.as_deref())
}
