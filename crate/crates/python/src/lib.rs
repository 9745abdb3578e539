//! Python bindings over the core toolkit.
//!
//! The module exposes the main operations on plain Python types: token
//! lists in and out, report dicts mirroring the JSON the CLI emits.

use pyo3::exceptions::PyValueError;
use pyo3::prelude::*;
use pyo3::types::{PyBool, PyDict, PyList, PyString};
use serde_json::Value;

use speechweave_core::chunk;
use speechweave_core::codec;
use speechweave_core::corpus;
use speechweave_core::ctc;
use speechweave_core::duration;
use speechweave_core::interleave;
use speechweave_core::metrics;
use speechweave_core::schedule;
use speechweave_core::Language;

fn value_err(e: impl std::fmt::Display) -> PyErr {
    PyValueError::new_err(e.to_string())
}

fn parse_language(language: &str) -> PyResult<Language> {
    language.parse::<Language>().map_err(value_err)
}

fn json_to_py<'py>(py: Python<'py>, value: &Value) -> PyResult<Bound<'py, PyAny>> {
    Ok(match value {
        Value::Null => py.None().into_bound(py),
        Value::Bool(b) => PyBool::new(py, *b).to_owned().into_any(),
        Value::Number(n) => {
            if let Some(i) = n.as_i64() {
                i.into_pyobject(py)?.into_any()
            } else if let Some(u) = n.as_u64() {
                u.into_pyobject(py)?.into_any()
            } else {
                n.as_f64().unwrap_or(f64::NAN).into_pyobject(py)?.into_any()
            }
        }
        Value::String(s) => PyString::new(py, s).into_any(),
        Value::Array(items) => {
            let list = PyList::empty(py);
            for item in items {
                list.append(json_to_py(py, item)?)?;
            }
            list.into_any()
        }
        Value::Object(map) => {
            let dict = PyDict::new(py);
            for (key, val) in map {
                dict.set_item(key, json_to_py(py, val)?)?;
            }
            dict.into_any()
        }
    })
}

fn report_to_py<'py, T: serde::Serialize>(py: Python<'py>, report: &T) -> PyResult<Bound<'py, PyAny>> {
    let value = serde_json::to_value(report).map_err(value_err)?;
    json_to_py(py, &value)
}

/// Merge consecutive repeated tokens; returns (run_tokens, run_counts).
#[pyfunction]
#[pyo3(signature = (tokens, vocab_size = codec::DEFAULT_VOCAB_SIZE))]
fn merge_runs(tokens: Vec<u32>, vocab_size: u32) -> PyResult<(Vec<u32>, Vec<u32>)> {
    let seq = codec::SpeechTokenSequence::with_vocab(tokens, vocab_size).map_err(value_err)?;
    let merged = codec::merge_runs(&seq).map_err(value_err)?;
    Ok((merged.run_tokens(), merged.run_counts()))
}

/// Expand each token by its repeat count.
#[pyfunction]
fn expand_with_counts(tokens: Vec<u32>, counts: Vec<u32>) -> PyResult<Vec<u32>> {
    codec::expand_with_counts(&tokens, &counts).map_err(value_err)
}

/// Best frame path collapsing to `labels`; returns (path, score).
#[pyfunction]
fn force_align(
    log_probs: Vec<Vec<f64>>,
    blank: usize,
    labels: Vec<usize>,
) -> PyResult<(Vec<usize>, f64)> {
    let em = ctc::EmissionMatrix::from_log_probs(log_probs, blank).map_err(value_err)?;
    let y = ctc::LabelSequence::new(labels).map_err(value_err)?;
    let path = ctc::force_align(&em, &y).map_err(value_err)?;
    Ok((path.path, path.score))
}

/// Remove adjacent repeats, then blanks.
#[pyfunction]
fn collapse(path: Vec<usize>, blank: usize) -> Vec<usize> {
    ctc::collapse(&path, blank)
}

/// Forced alignment straight to per-label token spans: aligns, reads the
/// frame boundaries, and rescales them onto `total_tokens` indices.
#[pyfunction]
fn align_boundaries(
    log_probs: Vec<Vec<f64>>,
    blank: usize,
    labels: Vec<usize>,
    total_tokens: usize,
) -> PyResult<Vec<(usize, usize)>> {
    let em = ctc::EmissionMatrix::from_log_probs(log_probs, blank).map_err(value_err)?;
    let y = ctc::LabelSequence::new(labels).map_err(value_err)?;
    let path = ctc::force_align(&em, &y).map_err(value_err)?;
    let frame_spans = ctc::token_boundaries(&path, &y, blank).map_err(value_err)?;
    let mapped = ctc::map_frames_to_token_indices(&frame_spans, em.frames(), total_tokens)
        .map_err(value_err)?;
    Ok(mapped.spans)
}

/// Cut text into chunks; returns dicts with text, separator, and word span.
#[pyfunction]
#[pyo3(signature = (text, language = "en", min_words = 7))]
fn segment_text<'py>(
    py: Python<'py>,
    text: &str,
    language: &str,
    min_words: usize,
) -> PyResult<Bound<'py, PyAny>> {
    let mut cfg = chunk::ChunkingConfig::new(parse_language(language)?);
    cfg.min_words = min_words;
    let chunks = chunk::segment_text(text, &cfg).map_err(value_err)?;
    report_to_py(py, &chunks)
}

/// Render one interleaved (or full chain-of-modality) example. The chunking
/// and span assignment run internally from the per-word boundaries.
#[pyfunction]
#[pyo3(signature = (
    question_text,
    question_tokens,
    answer_text,
    answer_tokens,
    word_boundaries,
    language = "en",
    min_words = 7,
    include_text_question = true,
    full_com = false,
    instruction = "Please directly answer the questions in the user's speech.",
    vocab_size = codec::DEFAULT_VOCAB_SIZE,
))]
#[allow(clippy::too_many_arguments)]
fn render_example<'py>(
    py: Python<'py>,
    question_text: &str,
    question_tokens: Vec<u32>,
    answer_text: &str,
    answer_tokens: Vec<u32>,
    word_boundaries: Vec<(usize, usize)>,
    language: &str,
    min_words: usize,
    include_text_question: bool,
    full_com: bool,
    instruction: &str,
    vocab_size: u32,
) -> PyResult<Bound<'py, PyAny>> {
    let language = parse_language(language)?;
    let mut cfg = chunk::ChunkingConfig::new(language);
    cfg.min_words = min_words;
    let chunks = chunk::segment_text(answer_text, &cfg).map_err(value_err)?;
    let chunks = chunk::assign_speech_spans(
        &chunks,
        &ctc::TokenBoundaries { spans: word_boundaries },
        answer_tokens.len(),
    )
    .map_err(value_err)?;
    let pair = interleave::ConversationPair {
        question_text: question_text.to_string(),
        question_tokens: codec::SpeechTokenSequence::with_vocab(question_tokens, vocab_size)
            .map_err(value_err)?,
        answer_text: answer_text.to_string(),
        answer_tokens: codec::SpeechTokenSequence::with_vocab(answer_tokens, vocab_size)
            .map_err(value_err)?,
        answer_chunks: chunks,
    };
    let example = if full_com {
        interleave::render_full_com(&pair, include_text_question, instruction)
    } else {
        interleave::render_interleaved(&pair, include_text_question, instruction)
    }
    .map_err(value_err)?;
    report_to_py(py, &example)
}

/// Parse rendered markup into ("text", str) / ("speech", [int]) tuples.
#[pyfunction]
fn parse_markup<'py>(py: Python<'py>, s: &str) -> PyResult<Bound<'py, PyAny>> {
    let segments = interleave::parse_markup(s).map_err(value_err)?;
    let list = PyList::empty(py);
    for segment in segments {
        match segment {
            interleave::MarkupSegment::Text(t) => {
                list.append(("text", t).into_pyobject(py)?)?;
            }
            interleave::MarkupSegment::Speech(ids) => {
                list.append(("speech", ids).into_pyobject(py)?)?;
            }
        }
    }
    Ok(list.into_any())
}

/// Compare interleaved vs full chain-of-modality latency for one utterance.
#[pyfunction]
#[pyo3(signature = (
    text_tokens,
    speech_merged,
    speech_expanded = None,
    tq_tokens = 0,
    chunk_size = 7,
    text_rate = 0.01,
    speech_rate = 0.01,
    synth_rate = 0.002,
    playback_rate = 0.04,
))]
#[allow(clippy::too_many_arguments)]
fn compare_modes<'py>(
    py: Python<'py>,
    text_tokens: usize,
    speech_merged: usize,
    speech_expanded: Option<usize>,
    tq_tokens: usize,
    chunk_size: usize,
    text_rate: f64,
    speech_rate: f64,
    synth_rate: f64,
    playback_rate: f64,
) -> PyResult<Bound<'py, PyAny>> {
    let totals = schedule::PairTotals {
        question_text_tokens: tq_tokens,
        answer_text_tokens: text_tokens,
        speech_tokens_merged: speech_merged,
        speech_tokens_expanded: speech_expanded.unwrap_or(speech_merged),
    };
    let rates = schedule::RateModel {
        seconds_per_text_token: text_rate,
        seconds_per_speech_token: speech_rate,
        synth_seconds_per_token: synth_rate,
        playback_seconds_per_token: playback_rate,
    };
    let comparison = schedule::compare_modes(&totals, &rates, chunk_size).map_err(value_err)?;
    report_to_py(py, &comparison)
}

/// Word or character error rate with S/I/D counts.
#[pyfunction]
#[pyo3(signature = (reference, hypothesis, unit = "word", normalization = "default"))]
fn edit_distance_rate<'py>(
    py: Python<'py>,
    reference: &str,
    hypothesis: &str,
    unit: &str,
    normalization: &str,
) -> PyResult<Bound<'py, PyAny>> {
    let unit = match unit {
        "word" => metrics::EditUnit::Word,
        "character" | "char" => metrics::EditUnit::Character,
        other => return Err(value_err(format!("unknown unit {other:?}"))),
    };
    let normalization = match normalization {
        "none" => metrics::Normalization::None,
        "default" => metrics::Normalization::Default,
        other => return Err(value_err(format!("unknown normalization {other:?}"))),
    };
    let report = metrics::edit_distance_rate(reference, hypothesis, unit, normalization)
        .map_err(value_err)?;
    report_to_py(py, &report)
}

/// Detected language of a text: "en", "zh", or "other".
#[pyfunction]
fn detect_language(text: &str) -> &'static str {
    match metrics::detect_language(text) {
        metrics::DetectedLanguage::En => "en",
        metrics::DetectedLanguage::Zh => "zh",
        metrics::DetectedLanguage::Other => "other",
    }
}

/// Percentage of responses not in the intended language.
#[pyfunction]
fn off_target_ratio<'py>(
    py: Python<'py>,
    responses: Vec<String>,
    intended: &str,
) -> PyResult<Bound<'py, PyAny>> {
    let report = metrics::off_target_ratio(&responses, parse_language(intended)?)
        .map_err(value_err)?;
    report_to_py(py, &report)
}

/// Mean cosine similarity under parallel or random (derangement) pairing.
#[pyfunction]
#[pyo3(signature = (vectors_a, vectors_b, pairing = "parallel", seed = 0))]
fn representation_similarity<'py>(
    py: Python<'py>,
    vectors_a: Vec<Vec<f64>>,
    vectors_b: Vec<Vec<f64>>,
    pairing: &str,
    seed: u64,
) -> PyResult<Bound<'py, PyAny>> {
    let pairing = match pairing {
        "parallel" => metrics::Pairing::Parallel,
        "random" => metrics::Pairing::Random,
        other => return Err(value_err(format!("unknown pairing {other:?}"))),
    };
    let report = metrics::representation_similarity(&vectors_a, &vectors_b, pairing, seed)
        .map_err(value_err)?;
    report_to_py(py, &report)
}

/// Generate a synthetic corpus on disk; returns the generation report.
#[pyfunction]
#[pyo3(signature = (
    out_dir,
    records = 100,
    vocab_size = 64,
    mean_words = 12,
    sharpness = 1.0,
    language = "en",
    deterministic_counts = false,
    seed = 0,
))]
#[allow(clippy::too_many_arguments)]
fn gen_synthetic_corpus<'py>(
    py: Python<'py>,
    out_dir: &str,
    records: usize,
    vocab_size: u32,
    mean_words: usize,
    sharpness: f64,
    language: &str,
    deterministic_counts: bool,
    seed: u64,
) -> PyResult<Bound<'py, PyAny>> {
    let cfg = corpus::SyntheticCorpusConfig {
        vocab_size,
        n_records: records,
        mean_answer_words: mean_words,
        emission_sharpness: sharpness,
        deterministic_counts,
        language: parse_language(language)?,
        seed,
        ..Default::default()
    };
    std::fs::create_dir_all(out_dir).map_err(value_err)?;
    let report = corpus::gen_synthetic_corpus(&cfg, std::path::Path::new(out_dir))
        .map_err(value_err)?;
    report_to_py(py, &report)
}

/// The trainable repeat-count predictor.
#[pyclass(name = "DurationModel")]
struct PyDurationModel {
    inner: duration::DurationModel,
}

#[pymethods]
impl PyDurationModel {
    /// Train on (tokens, counts) pairs; returns (model, report dict).
    #[staticmethod]
    #[pyo3(signature = (
        dataset,
        vocab_size,
        buckets = 16,
        embedding_dim = 16,
        channels = 32,
        kernel_width = 3,
        learning_rate = 0.5,
        epochs = 40,
        batch_size = 16,
        seed = 0,
    ))]
    #[allow(clippy::too_many_arguments)]
    fn train(
        py: Python<'_>,
        dataset: Vec<(Vec<u32>, Vec<u32>)>,
        vocab_size: u32,
        buckets: usize,
        embedding_dim: usize,
        channels: usize,
        kernel_width: usize,
        learning_rate: f64,
        epochs: usize,
        batch_size: usize,
        seed: u64,
    ) -> PyResult<(Self, Py<PyAny>)> {
        let examples: Vec<duration::DurationExample> = dataset
            .into_iter()
            .map(|(tokens, counts)| duration::DurationExample { tokens, counts })
            .collect();
        let model_cfg = duration::DurationModelConfig {
            vocab_size,
            embedding_dim,
            kernel_width,
            channels,
            buckets,
        };
        let train_cfg = duration::DurationTrainingConfig {
            learning_rate,
            epochs,
            batch_size,
            seed,
        };
        let (inner, report) =
            duration::DurationModel::train(&examples, model_cfg, &train_cfg).map_err(value_err)?;
        let report = report_to_py(py, &report)?.unbind();
        Ok((PyDurationModel { inner }, report))
    }

    /// One predicted repeat count per merged run token.
    fn predict_counts(&self, tokens: Vec<u32>) -> PyResult<Vec<u32>> {
        self.inner.predict_counts(&tokens).map_err(value_err)
    }

    /// Position accuracy and mean absolute expanded-length error.
    fn evaluate(&self, dataset: Vec<(Vec<u32>, Vec<u32>)>) -> PyResult<(f64, f64)> {
        let examples: Vec<duration::DurationExample> = dataset
            .into_iter()
            .map(|(tokens, counts)| duration::DurationExample { tokens, counts })
            .collect();
        self.inner.evaluate(&examples).map_err(value_err)
    }

    fn to_json(&self) -> PyResult<String> {
        serde_json::to_string(&self.inner).map_err(value_err)
    }

    #[staticmethod]
    fn from_json(data: &str) -> PyResult<Self> {
        Ok(PyDurationModel {
            inner: serde_json::from_str(data).map_err(value_err)?,
        })
    }
}

#[pymodule]
fn _speechweave(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_function(wrap_pyfunction!(merge_runs, m)?)?;
    m.add_function(wrap_pyfunction!(expand_with_counts, m)?)?;
    m.add_function(wrap_pyfunction!(force_align, m)?)?;
    m.add_function(wrap_pyfunction!(collapse, m)?)?;
    m.add_function(wrap_pyfunction!(align_boundaries, m)?)?;
    m.add_function(wrap_pyfunction!(segment_text, m)?)?;
    m.add_function(wrap_pyfunction!(render_example, m)?)?;
    m.add_function(wrap_pyfunction!(parse_markup, m)?)?;
    m.add_function(wrap_pyfunction!(compare_modes, m)?)?;
    m.add_function(wrap_pyfunction!(edit_distance_rate, m)?)?;
    m.add_function(wrap_pyfunction!(detect_language, m)?)?;
    m.add_function(wrap_pyfunction!(off_target_ratio, m)?)?;
    m.add_function(wrap_pyfunction!(representation_similarity, m)?)?;
    m.add_function(wrap_pyfunction!(gen_synthetic_corpus, m)?)?;
    m.add_class::<PyDurationModel>()?;
    Ok(())
}
