use std::path::PathBuf;

use anyhow::{Context, Result};
use clap::Args;
use speechweave_core::corpus::gen_synthetic_corpus;
use speechweave_core::Language;

use crate::config::PipelineConfig;
use crate::output;

#[derive(Args)]
pub struct GenSyntheticArgs {
    /// Directory receiving manifest.jsonl and emissions/.
    #[arg(long)]
    pub out_dir: PathBuf,
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long)]
    pub records: Option<usize>,
    #[arg(long)]
    pub vocab_size: Option<u32>,
    #[arg(long)]
    pub mean_words: Option<usize>,
    /// Probability mass on the true label per emission frame, in (0, 1].
    #[arg(long)]
    pub sharpness: Option<f64>,
    #[arg(long)]
    pub language: Option<Language>,
    /// Make repeat counts a fixed function of the token id.
    #[arg(long)]
    pub deterministic_counts: bool,
    #[arg(long)]
    pub seed: Option<u64>,
    /// Write the generation report here instead of stdout.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

pub fn run(args: GenSyntheticArgs) -> Result<()> {
    let pipeline = PipelineConfig::load(args.config.as_deref())?;
    let mut cfg = pipeline.synthetic.unwrap_or_default();
    if let Some(v) = args.records {
        cfg.n_records = v;
    }
    if let Some(v) = args.vocab_size {
        cfg.vocab_size = v;
    }
    if let Some(v) = args.mean_words {
        cfg.mean_answer_words = v;
    }
    if let Some(v) = args.sharpness {
        cfg.emission_sharpness = v;
    }
    if let Some(v) = args.language {
        cfg.language = v;
    }
    if args.deterministic_counts {
        cfg.deterministic_counts = true;
    }
    if let Some(v) = args.seed.or(pipeline.seed) {
        cfg.seed = v;
    }
    std::fs::create_dir_all(&args.out_dir)
        .with_context(|| format!("creating {}", args.out_dir.display()))?;
    let report = gen_synthetic_corpus(&cfg, &args.out_dir)?;
    output::emit(&report, args.out.as_deref())
}
