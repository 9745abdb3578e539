//! Manifest and artifact serialization plus a seeded synthetic-corpus
//! generator.
//!
//! Manifests are line-delimited JSON, one record per line, written in a
//! canonical form (sorted keys) so byte equality is meaningful. Emission
//! matrices live in separate flat binary files of little-endian `f32` with a
//! small versioned header, referenced from records by relative path.
//!
//! The synthetic generator produces records with ground-truth alignments by
//! construction: per-word speech-token runs, word boundaries, and an
//! emission matrix that puts `sharpness` probability mass on the true label
//! at every frame (frames are 1:1 with speech tokens). Generation is
//! deterministic given the seed, with per-record substreams so record order
//! and parallelism cannot change the output.

use std::collections::BTreeSet;
use std::fs;
use std::io::{BufRead, BufReader, BufWriter, Read, Write};
use std::path::{Path, PathBuf};

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::codec::{merge_runs, SpeechTokenSequence};
use crate::ctc::EmissionMatrix;
use crate::duration::DurationModel;
use crate::Language;

/// Version tag carried by every manifest record.
pub const MANIFEST_FORMAT_VERSION: u32 = 1;
/// Magic bytes opening an emission file.
pub const EMISSIONS_MAGIC: [u8; 4] = *b"SWEM";
/// Version of the emission binary layout.
pub const EMISSIONS_FORMAT_VERSION: u32 = 1;
/// Version tag of the serialized duration-model file.
pub const DURATION_MODEL_FORMAT_VERSION: u32 = 1;

#[derive(Debug, Error)]
pub enum CorpusError {
    #[error("io error on {path}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("{path}:{line}: malformed record: {message}")]
    MalformedRecord {
        path: PathBuf,
        line: usize,
        message: String,
    },
    #[error("{path}:{line}: duplicate record id {id:?}")]
    DuplicateId {
        path: PathBuf,
        line: usize,
        id: String,
    },
    #[error("{path}:{line}: unsupported format_version {version} (supported: {supported})")]
    UnsupportedVersion {
        path: PathBuf,
        line: usize,
        version: u32,
        supported: u32,
    },
    #[error("emission file {path} is invalid: {message}")]
    BadEmissionFile { path: PathBuf, message: String },
    #[error("emission data invalid: {0}")]
    BadEmissions(#[from] crate::ctc::AlignError),
    #[error("serialization failed: {0}")]
    Serde(#[from] serde_json::Error),
    #[error("synthetic config invalid: {0}")]
    InvalidConfig(String),
    #[error("duration model file {path} is invalid: {message}")]
    BadModelFile { path: PathBuf, message: String },
}

/// One speech-text pair in a manifest.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ManifestRecord {
    pub format_version: u32,
    pub id: String,
    pub text: String,
    pub language: Language,
    pub speech_tokens: Vec<u32>,
    /// Run-length counts of `speech_tokens` (training data for the duration
    /// model).
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub run_counts: Option<Vec<u32>>,
    /// Relative path of this record's emission file.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub emissions_ref: Option<String>,
    /// Per-word speech-token spans (inclusive), in token index space.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub boundaries: Option<Vec<(usize, usize)>>,
    /// Unknown fields, preserved across read/write roundtrips.
    #[serde(flatten)]
    pub extra: serde_json::Map<String, serde_json::Value>,
}

impl ManifestRecord {
    pub fn new(id: impl Into<String>, text: impl Into<String>, language: Language) -> Self {
        ManifestRecord {
            format_version: MANIFEST_FORMAT_VERSION,
            id: id.into(),
            text: text.into(),
            language,
            speech_tokens: Vec::new(),
            run_counts: None,
            emissions_ref: None,
            boundaries: None,
            extra: serde_json::Map::new(),
        }
    }
}

/// Canonical single-line JSON for one record: keys sorted, no trailing
/// whitespace.
pub fn canonical_record_json(record: &ManifestRecord) -> Result<String, CorpusError> {
    // serde_json maps are BTreeMaps, so going through Value sorts the keys.
    let value = serde_json::to_value(record)?;
    Ok(serde_json::to_string(&value)?)
}

pub fn write_manifest(records: &[ManifestRecord], path: &Path) -> Result<(), CorpusError> {
    let io_err = |source| CorpusError::Io { path: path.to_path_buf(), source };
    let file = fs::File::create(path).map_err(io_err)?;
    let mut out = BufWriter::new(file);
    for record in records {
        let line = canonical_record_json(record)?;
        writeln!(out, "{line}").map_err(io_err)?;
    }
    out.flush().map_err(io_err)
}

pub fn read_manifest(path: &Path) -> Result<Vec<ManifestRecord>, CorpusError> {
    let file = fs::File::open(path).map_err(|source| CorpusError::Io {
        path: path.to_path_buf(),
        source,
    })?;
    let reader = BufReader::new(file);
    let mut records = Vec::new();
    let mut seen = BTreeSet::new();
    for (index, line) in reader.lines().enumerate() {
        let line_no = index + 1;
        let line = line.map_err(|source| CorpusError::Io {
            path: path.to_path_buf(),
            source,
        })?;
        if line.trim().is_empty() {
            continue;
        }
        let record: ManifestRecord =
            serde_json::from_str(&line).map_err(|e| CorpusError::MalformedRecord {
                path: path.to_path_buf(),
                line: line_no,
                message: e.to_string(),
            })?;
        if record.format_version > MANIFEST_FORMAT_VERSION {
            return Err(CorpusError::UnsupportedVersion {
                path: path.to_path_buf(),
                line: line_no,
                version: record.format_version,
                supported: MANIFEST_FORMAT_VERSION,
            });
        }
        if !seen.insert(record.id.clone()) {
            return Err(CorpusError::DuplicateId {
                path: path.to_path_buf(),
                line: line_no,
                id: record.id,
            });
        }
        records.push(record);
    }
    Ok(records)
}

/// Writes an emission matrix: magic, version, frames, labels, blank index
/// (all little-endian u32), then row-major f32 log-probabilities.
pub fn write_emissions(path: &Path, em: &EmissionMatrix) -> Result<(), CorpusError> {
    let io_err = |source| CorpusError::Io { path: path.to_path_buf(), source };
    let file = fs::File::create(path).map_err(io_err)?;
    let mut out = BufWriter::new(file);
    out.write_all(&EMISSIONS_MAGIC).map_err(io_err)?;
    for v in [
        EMISSIONS_FORMAT_VERSION,
        em.frames() as u32,
        em.vocab() as u32,
        em.blank() as u32,
    ] {
        out.write_all(&v.to_le_bytes()).map_err(io_err)?;
    }
    for t in 0..em.frames() {
        for &lp in em.row(t) {
            out.write_all(&(lp as f32).to_le_bytes()).map_err(io_err)?;
        }
    }
    out.flush().map_err(io_err)
}

pub fn read_emissions(path: &Path) -> Result<EmissionMatrix, CorpusError> {
    let io_err = |source| CorpusError::Io { path: path.to_path_buf(), source };
    let bad = |message: &str| CorpusError::BadEmissionFile {
        path: path.to_path_buf(),
        message: message.to_string(),
    };
    let mut file = BufReader::new(fs::File::open(path).map_err(io_err)?);
    let mut magic = [0u8; 4];
    file.read_exact(&mut magic).map_err(io_err)?;
    if magic != EMISSIONS_MAGIC {
        return Err(bad("wrong magic bytes"));
    }
    let mut word = [0u8; 4];
    let mut next_u32 = |file: &mut BufReader<fs::File>| -> Result<u32, CorpusError> {
        file.read_exact(&mut word).map_err(|source| CorpusError::Io {
            path: path.to_path_buf(),
            source,
        })?;
        Ok(u32::from_le_bytes(word))
    };
    let version = next_u32(&mut file)?;
    if version != EMISSIONS_FORMAT_VERSION {
        return Err(bad(&format!("unsupported version {version}")));
    }
    let frames = next_u32(&mut file)? as usize;
    let vocab = next_u32(&mut file)? as usize;
    let blank = next_u32(&mut file)? as usize;

    let mut payload = Vec::new();
    file.read_to_end(&mut payload).map_err(io_err)?;
    if payload.len() != frames * vocab * 4 {
        return Err(bad(&format!(
            "payload holds {} bytes, expected {}",
            payload.len(),
            frames * vocab * 4
        )));
    }
    let mut rows = Vec::with_capacity(frames);
    for t in 0..frames {
        let mut row = Vec::with_capacity(vocab);
        for l in 0..vocab {
            let at = (t * vocab + l) * 4;
            let bits = [payload[at], payload[at + 1], payload[at + 2], payload[at + 3]];
            row.push(f32::from_le_bytes(bits) as f64);
        }
        rows.push(row);
    }
    Ok(EmissionMatrix::from_log_probs(rows, blank)?)
}

/// Saves duration-model parameters as versioned JSON.
pub fn save_duration_model(path: &Path, model: &DurationModel) -> Result<(), CorpusError> {
    #[derive(Serialize)]
    struct Wrapper<'a> {
        format_version: u32,
        model: &'a DurationModel,
    }
    let json = serde_json::to_string(&Wrapper {
        format_version: DURATION_MODEL_FORMAT_VERSION,
        model,
    })?;
    fs::write(path, json).map_err(|source| CorpusError::Io {
        path: path.to_path_buf(),
        source,
    })
}

pub fn load_duration_model(path: &Path) -> Result<DurationModel, CorpusError> {
    #[derive(Deserialize)]
    struct Wrapper {
        format_version: u32,
        model: DurationModel,
    }
    let data = fs::read_to_string(path).map_err(|source| CorpusError::Io {
        path: path.to_path_buf(),
        source,
    })?;
    let wrapper: Wrapper = serde_json::from_str(&data)?;
    if wrapper.format_version != DURATION_MODEL_FORMAT_VERSION {
        return Err(CorpusError::BadModelFile {
            path: path.to_path_buf(),
            message: format!("unsupported format_version {}", wrapper.format_version),
        });
    }
    Ok(wrapper.model)
}

/// Knobs of the synthetic corpus generator.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SyntheticCorpusConfig {
    pub vocab_size: u32,
    pub n_records: usize,
    pub mean_answer_words: usize,
    /// Weight of repeat count `i + 1` when sampling run lengths.
    pub repeat_weights: Vec<f64>,
    /// Probability mass placed on the true label per frame; the rest is
    /// spread uniformly over the other labels.
    pub emission_sharpness: f64,
    /// When set, a run's repeat count is a fixed function of its token id
    /// instead of a draw from `repeat_weights`, so the duration predictor
    /// has something learnable.
    pub deterministic_counts: bool,
    pub language: Language,
    pub seed: u64,
}

/// The fixed token-to-count mapping used when `deterministic_counts` is on.
pub fn deterministic_count(token: u32, max_count: u32) -> u32 {
    (token * 7 + 3) % max_count + 1
}

impl Default for SyntheticCorpusConfig {
    fn default() -> Self {
        SyntheticCorpusConfig {
            vocab_size: 64,
            n_records: 100,
            mean_answer_words: 12,
            repeat_weights: vec![0.35, 0.3, 0.2, 0.1, 0.05],
            emission_sharpness: 1.0,
            deterministic_counts: false,
            language: Language::En,
            seed: 0,
        }
    }
}

impl SyntheticCorpusConfig {
    fn validate(&self) -> Result<(), CorpusError> {
        if self.vocab_size == 0 || self.mean_answer_words == 0 {
            return Err(CorpusError::InvalidConfig("sizes must be positive".into()));
        }
        if self.repeat_weights.is_empty() || self.repeat_weights.iter().any(|&w| w < 0.0) {
            return Err(CorpusError::InvalidConfig(
                "repeat_weights must be non-empty and non-negative".into(),
            ));
        }
        if self.repeat_weights.iter().sum::<f64>() <= 0.0 {
            return Err(CorpusError::InvalidConfig("repeat_weights sum to zero".into()));
        }
        if !(self.emission_sharpness > 0.0 && self.emission_sharpness <= 1.0) {
            return Err(CorpusError::InvalidConfig(
                "emission_sharpness must be in (0, 1]".into(),
            ));
        }
        Ok(())
    }
}

/// One generated record before serialization: the manifest entry, its
/// emissions, and the ground truth the construction guarantees.
#[derive(Debug, Clone)]
pub struct SyntheticRecord {
    pub record: ManifestRecord,
    pub emissions: EmissionMatrix,
    /// Per-word speech-token spans, identical to `record.boundaries`.
    pub word_spans: Vec<(usize, usize)>,
}

const EN_WORDS: &[&str] = &[
    "the", "a", "garden", "pencil", "plant", "marker", "water", "light", "morning", "paper",
    "river", "stone", "answer", "question", "music", "window", "road", "summer", "winter",
    "bird", "cloud", "bread", "letter", "friend", "house", "tree", "mountain", "story", "voice",
    "color", "night", "day", "hand", "city", "field", "rain", "snow", "book", "door", "table",
];

const ZH_CHARS: &[char] = &[
    '天', '气', '很', '好', '我', '们', '一', '起', '出', '去', '玩', '今', '明', '朋', '友',
    '学', '习', '音', '乐', '水', '山', '花', '鸟', '书', '门', '路', '光', '春', '夏', '秋',
];

fn mix_seed(seed: u64, index: u64) -> u64 {
    // SplitMix64 over (seed, index) so each record has its own substream.
    let mut z = seed ^ index.wrapping_mul(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

fn sample_weighted(rng: &mut ChaCha8Rng, weights: &[f64]) -> usize {
    let total: f64 = weights.iter().sum();
    let mut draw = rng.random_range(0.0..total);
    for (i, &w) in weights.iter().enumerate() {
        if draw < w {
            return i;
        }
        draw -= w;
    }
    weights.len() - 1
}

/// Generates one record. Words get 1-4 speech-token runs each; counts come
/// from the configured distribution; adjacent runs never repeat a token id,
/// so the generated run list equals `merge_runs` of the expanded sequence.
/// Emission frames are 1:1 with speech tokens and favor the owning word's
/// label with `emission_sharpness`.
pub fn generate_record(
    cfg: &SyntheticCorpusConfig,
    index: usize,
) -> Result<SyntheticRecord, CorpusError> {
    cfg.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(mix_seed(cfg.seed, index as u64));

    let min_words = cfg.mean_answer_words.saturating_sub(4).max(2);
    let max_words = cfg.mean_answer_words + 4;
    let n_words = rng.random_range(min_words..=max_words);

    // Text with punctuation so the chunker has cut points. Words never
    // repeat back to back, keeping alignment labels free of duplicates.
    let mut words: Vec<String> = Vec::with_capacity(n_words);
    let mut text = String::new();
    for w in 0..n_words {
        let word = match cfg.language {
            Language::En => loop {
                let cand = EN_WORDS[rng.random_range(0..EN_WORDS.len())];
                if words.last().map(|s| s != cand).unwrap_or(true) {
                    break cand.to_string();
                }
            },
            Language::Zh => loop {
                let cand = ZH_CHARS[rng.random_range(0..ZH_CHARS.len())].to_string();
                if words.last() != Some(&cand) {
                    break cand;
                }
            },
        };
        let is_last = w + 1 == n_words;
        let punct: Option<char> = if is_last {
            Some(match cfg.language {
                Language::En => '.',
                Language::Zh => '。',
            })
        } else if rng.random_range(0.0..1.0) < 0.22 {
            Some(match cfg.language {
                Language::En => ',',
                Language::Zh => '，',
            })
        } else {
            None
        };
        text.push_str(&word);
        if let Some(p) = punct {
            text.push(p);
        }
        if !is_last && matches!(cfg.language, Language::En) {
            text.push(' ');
        }
        words.push(word);
    }

    // Per-word speech-token runs with ground-truth spans.
    let mut speech_tokens: Vec<u32> = Vec::new();
    let mut word_spans = Vec::with_capacity(n_words);
    for _ in 0..n_words {
        let start = speech_tokens.len();
        let n_runs = rng.random_range(1..=4usize);
        for _ in 0..n_runs {
            let token = loop {
                let cand = rng.random_range(0..cfg.vocab_size);
                if speech_tokens.last().map(|&t| t != cand).unwrap_or(true) {
                    break cand;
                }
            };
            let count = if cfg.deterministic_counts {
                deterministic_count(token, cfg.repeat_weights.len() as u32) as usize
            } else {
                sample_weighted(&mut rng, &cfg.repeat_weights) + 1
            };
            speech_tokens.extend(std::iter::repeat_n(token, count));
        }
        word_spans.push((start, speech_tokens.len() - 1));
    }

    // Emissions: labels are word positions shifted by one, blank is 0;
    // every frame favors the word owning that token.
    let label_vocab = n_words + 1;
    let sharp = cfg.emission_sharpness;
    if sharp <= 1.0 / label_vocab as f64 {
        return Err(CorpusError::InvalidConfig(format!(
            "emission_sharpness {sharp} must exceed 1/{label_vocab} for this record"
        )));
    }
    let off = if label_vocab > 1 {
        (1.0 - sharp) / (label_vocab - 1) as f64
    } else {
        0.0
    };
    let mut rows = Vec::with_capacity(speech_tokens.len());
    for (word_idx, &(start, end)) in word_spans.iter().enumerate() {
        for _ in start..=end {
            let mut row = vec![off.ln(); label_vocab];
            row[word_idx + 1] = sharp.ln();
            rows.push(row);
        }
    }
    let emissions = EmissionMatrix::from_log_probs(rows, 0)?;

    let seq = SpeechTokenSequence::with_vocab(speech_tokens.clone(), cfg.vocab_size)
        .map_err(|e| CorpusError::InvalidConfig(e.to_string()))?;
    let merged = merge_runs(&seq).map_err(|e| CorpusError::InvalidConfig(e.to_string()))?;

    // A small spoken question so conversation pairs can be built from the
    // record alone.
    let question_text = match cfg.language {
        Language::En => format!("Can you tell me about the {}?", words[0]),
        Language::Zh => format!("请说说{}？", words[0]),
    };
    let mut question_tokens: Vec<u32> = Vec::new();
    for _ in 0..rng.random_range(3..=6usize) {
        let token = loop {
            let cand = rng.random_range(0..cfg.vocab_size);
            if question_tokens.last().map(|&t| t != cand).unwrap_or(true) {
                break cand;
            }
        };
        let count = sample_weighted(&mut rng, &cfg.repeat_weights) + 1;
        question_tokens.extend(std::iter::repeat_n(token, count));
    }

    let mut record = ManifestRecord::new(format!("rec-{index:06}"), text, cfg.language);
    record.speech_tokens = speech_tokens;
    record.run_counts = Some(merged.run_counts());
    record.boundaries = Some(word_spans.clone());
    record
        .extra
        .insert("question_text".into(), serde_json::json!(question_text));
    record
        .extra
        .insert("question_tokens".into(), serde_json::json!(question_tokens));
    Ok(SyntheticRecord {
        record,
        emissions,
        word_spans,
    })
}

/// Report returned by [`gen_synthetic_corpus`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GenReport {
    pub manifest_path: PathBuf,
    pub emissions_dir: PathBuf,
    pub n_records: usize,
}

/// Generates the corpus under `out_dir`: `manifest.jsonl` plus one emission
/// file per record in `emissions/`.
pub fn gen_synthetic_corpus(
    cfg: &SyntheticCorpusConfig,
    out_dir: &Path,
) -> Result<GenReport, CorpusError> {
    cfg.validate()?;
    let emissions_dir = out_dir.join("emissions");
    fs::create_dir_all(&emissions_dir).map_err(|source| CorpusError::Io {
        path: emissions_dir.clone(),
        source,
    })?;
    let mut records = Vec::with_capacity(cfg.n_records);
    for index in 0..cfg.n_records {
        let mut generated = generate_record(cfg, index)?;
        let file_name = format!("emissions/{}.bin", generated.record.id);
        write_emissions(&out_dir.join(&file_name), &generated.emissions)?;
        generated.record.emissions_ref = Some(file_name);
        records.push(generated.record);
    }
    let manifest_path = out_dir.join("manifest.jsonl");
    write_manifest(&records, &manifest_path)?;
    Ok(GenReport {
        manifest_path,
        emissions_dir,
        n_records: cfg.n_records,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ctc::{force_align, map_frames_to_token_indices, token_boundaries, LabelSequence};

    fn temp_dir() -> tempfile::TempDir {
        tempfile::tempdir().unwrap()
    }

    #[test]
    fn manifest_roundtrip_preserves_records_and_order() {
        let dir = temp_dir();
        let path = dir.path().join("m.jsonl");
        let mut records = Vec::new();
        for i in 0..3 {
            let mut r = ManifestRecord::new(format!("id-{i}"), format!("text {i}"), Language::En);
            r.speech_tokens = vec![i as u32, i as u32 + 1];
            records.push(r);
        }
        write_manifest(&records, &path).unwrap();
        let back = read_manifest(&path).unwrap();
        assert_eq!(back, records);
    }

    #[test]
    fn empty_manifest_reads_empty() {
        let dir = temp_dir();
        let path = dir.path().join("empty.jsonl");
        fs::write(&path, "").unwrap();
        assert!(read_manifest(&path).unwrap().is_empty());
    }

    #[test]
    fn malformed_line_reports_line_number() {
        let dir = temp_dir();
        let path = dir.path().join("bad.jsonl");
        let good = canonical_record_json(&ManifestRecord::new("a", "t", Language::En)).unwrap();
        fs::write(&path, format!("{good}\n{{not json\n")).unwrap();
        match read_manifest(&path) {
            Err(CorpusError::MalformedRecord { line, .. }) => assert_eq!(line, 2),
            other => panic!("expected malformed record, got {other:?}"),
        }
    }

    #[test]
    fn duplicate_ids_are_rejected() {
        let dir = temp_dir();
        let path = dir.path().join("dup.jsonl");
        let records = vec![
            ManifestRecord::new("same", "a", Language::En),
            ManifestRecord::new("same", "b", Language::En),
        ];
        write_manifest(&records, &path).unwrap();
        assert!(matches!(
            read_manifest(&path),
            Err(CorpusError::DuplicateId { line: 2, .. })
        ));
    }

    #[test]
    fn unknown_fields_survive_canonical_roundtrip() {
        let dir = temp_dir();
        let path = dir.path().join("extra.jsonl");
        let mut record = ManifestRecord::new("x", "t", Language::Zh);
        record
            .extra
            .insert("custom".into(), serde_json::json!({"nested": [1, 2]}));
        write_manifest(&[record.clone()], &path).unwrap();
        let back = read_manifest(&path).unwrap();
        assert_eq!(back[0], record);

        // Canonical form is byte-stable across a write/read/write cycle.
        let again = canonical_record_json(&back[0]).unwrap();
        assert_eq!(again, canonical_record_json(&record).unwrap());
    }

    #[test]
    fn emission_file_roundtrip() {
        let dir = temp_dir();
        let path = dir.path().join("e.bin");
        let em = EmissionMatrix::from_probs(
            vec![vec![0.5, 0.25, 0.25], vec![0.1, 0.6, 0.3]],
            0,
        )
        .unwrap();
        write_emissions(&path, &em).unwrap();
        let back = read_emissions(&path).unwrap();
        assert_eq!(back.frames(), 2);
        assert_eq!(back.vocab(), 3);
        assert_eq!(back.blank(), 0);
        for t in 0..2 {
            for l in 0..3 {
                assert!((back.log_prob(t, l) - em.log_prob(t, l)).abs() < 1e-6);
            }
        }
    }

    #[test]
    fn emission_reader_rejects_truncation() {
        let dir = temp_dir();
        let path = dir.path().join("e.bin");
        let em = EmissionMatrix::from_probs(vec![vec![0.5, 0.5]], 0).unwrap();
        write_emissions(&path, &em).unwrap();
        let bytes = fs::read(&path).unwrap();
        fs::write(&path, &bytes[..bytes.len() - 2]).unwrap();
        assert!(matches!(
            read_emissions(&path),
            Err(CorpusError::BadEmissionFile { .. })
        ));
    }

    #[test]
    fn duration_model_file_roundtrip() {
        let dir = temp_dir();
        let path = dir.path().join("dp.json");
        let cfg = crate::duration::DurationModelConfig {
            vocab_size: 8,
            embedding_dim: 4,
            kernel_width: 3,
            channels: 4,
            buckets: 6,
        };
        let model = DurationModel::init(cfg, 3, 0.1).unwrap();
        save_duration_model(&path, &model).unwrap();
        let back = load_duration_model(&path).unwrap();
        assert_eq!(back, model);
    }

    #[test]
    fn generation_is_deterministic() {
        let cfg = SyntheticCorpusConfig { n_records: 5, ..Default::default() };
        let a: Vec<_> = (0..5).map(|i| generate_record(&cfg, i).unwrap().record).collect();
        let b: Vec<_> = (0..5).map(|i| generate_record(&cfg, i).unwrap().record).collect();
        assert_eq!(a, b);
    }

    #[test]
    fn generated_runs_match_merge_of_expansion() {
        let cfg = SyntheticCorpusConfig::default();
        for i in 0..20 {
            let generated = generate_record(&cfg, i).unwrap();
            let seq = SpeechTokenSequence::with_vocab(
                generated.record.speech_tokens.clone(),
                cfg.vocab_size,
            )
            .unwrap();
            let merged = merge_runs(&seq).unwrap();
            assert_eq!(
                generated.record.run_counts.as_ref().unwrap(),
                &merged.run_counts()
            );
            // Boundaries partition the token range.
            let spans = generated.record.boundaries.as_ref().unwrap();
            assert_eq!(spans[0].0, 0);
            assert_eq!(spans.last().unwrap().1, seq.len() - 1);
            for w in spans.windows(2) {
                assert_eq!(w[0].1 + 1, w[1].0);
            }
        }
    }

    #[test]
    fn sharp_emissions_recover_ground_truth_exactly() {
        let cfg = SyntheticCorpusConfig {
            emission_sharpness: 1.0,
            n_records: 25,
            ..Default::default()
        };
        for i in 0..cfg.n_records {
            let generated = generate_record(&cfg, i).unwrap();
            let n_words = generated.word_spans.len();
            let labels = LabelSequence::new((1..=n_words).collect()).unwrap();
            let path = force_align(&generated.emissions, &labels).unwrap();
            let frame_spans = token_boundaries(&path, &labels, 0).unwrap();
            let token_spans = map_frames_to_token_indices(
                &frame_spans,
                generated.emissions.frames(),
                generated.record.speech_tokens.len(),
            )
            .unwrap();
            assert_eq!(token_spans.spans, generated.word_spans, "record {i}");
        }
    }

    #[test]
    fn zero_records_give_empty_manifest() {
        let dir = temp_dir();
        let cfg = SyntheticCorpusConfig { n_records: 0, ..Default::default() };
        let report = gen_synthetic_corpus(&cfg, dir.path()).unwrap();
        assert_eq!(report.n_records, 0);
        assert!(read_manifest(&report.manifest_path).unwrap().is_empty());
    }

    #[test]
    fn corpus_on_disk_is_seed_deterministic() {
        let cfg = SyntheticCorpusConfig { n_records: 4, ..Default::default() };
        let dir_a = temp_dir();
        let dir_b = temp_dir();
        gen_synthetic_corpus(&cfg, dir_a.path()).unwrap();
        gen_synthetic_corpus(&cfg, dir_b.path()).unwrap();
        let a = fs::read(dir_a.path().join("manifest.jsonl")).unwrap();
        let b = fs::read(dir_b.path().join("manifest.jsonl")).unwrap();
        assert_eq!(a, b);
        let ea = fs::read(dir_a.path().join("emissions/rec-000002.bin")).unwrap();
        let eb = fs::read(dir_b.path().join("emissions/rec-000002.bin")).unwrap();
        assert_eq!(ea, eb);
    }
}
