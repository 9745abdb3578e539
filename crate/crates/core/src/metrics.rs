//! Automated evaluation metrics: edit-distance error rates, off-target
//! ratio with pluggable language detection, and the representation
//! similarity protocol over externally supplied vectors.

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;
use unicode_segmentation::UnicodeSegmentation;

use crate::chunk::default_punctuation;
use crate::Language;

#[derive(Debug, Error, PartialEq)]
pub enum MetricsError {
    #[error("reference is empty after normalization; the rate is undefined")]
    EmptyReference,
    #[error("response list is empty")]
    EmptyResponses,
    #[error("vector lists have mismatched lengths ({a} vs {b})")]
    LengthMismatch { a: usize, b: usize },
    #[error("vectors at index {index} have mismatched dimensions ({a} vs {b})")]
    DimensionMismatch { index: usize, a: usize, b: usize },
    #[error("vector {index} in list {list} is zero; cosine is undefined")]
    ZeroVector { list: char, index: usize },
    #[error("random pairing needs at least two pairs to avoid the identity")]
    TooFewForRandomPairing,
}

/// Unit of edit-distance comparison.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum EditUnit {
    Word,
    Character,
}

/// Text normalization applied before error-rate computation.
///
/// `Default` lowercases, strips the chunker's punctuation set, and collapses
/// whitespace, approximating the unpunctuated surface that ASR transcripts
/// are compared on. `None` compares the raw strings.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Normalization {
    None,
    Default,
}

/// Minimal edit counts and the resulting error rate.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ErrorRateReport {
    pub substitutions: usize,
    pub insertions: usize,
    pub deletions: usize,
    pub reference_length: usize,
    /// `(S + I + D) / reference_length`; may exceed 1.
    pub rate: f64,
    pub unit: EditUnit,
}

pub fn normalize_text(text: &str, normalization: Normalization) -> String {
    match normalization {
        Normalization::None => text.to_string(),
        Normalization::Default => {
            let punctuation = default_punctuation();
            let stripped: String = text
                .chars()
                .map(|c| if punctuation.contains(&c) { ' ' } else { c })
                .collect();
            stripped
                .to_lowercase()
                .split_whitespace()
                .collect::<Vec<_>>()
                .join(" ")
        }
    }
}

fn units(text: &str, unit: EditUnit) -> Vec<String> {
    match unit {
        EditUnit::Word => text.split_whitespace().map(str::to_string).collect(),
        EditUnit::Character => text
            .graphemes(true)
            .filter(|g| !g.chars().all(char::is_whitespace))
            .map(str::to_string)
            .collect(),
    }
}

/// Levenshtein DP over (distance, -substitutions) in lexicographic order:
/// among minimal scripts the one with the most substitutions is canonical.
/// That makes the decomposition symmetric — swapping the arguments keeps S
/// and swaps I with D — since insertions minus deletions is fixed by the
/// length difference once S is pinned.
fn edit_counts(reference: &[String], hypothesis: &[String]) -> (usize, usize, usize) {
    let n = reference.len();
    let m = hypothesis.len();
    // (distance, subs) per cell; subs is the max achievable at that distance.
    let mut dp = vec![(0usize, 0usize); (n + 1) * (m + 1)];
    let idx = |i: usize, j: usize| i * (m + 1) + j;
    for i in 0..=n {
        dp[idx(i, 0)] = (i, 0);
    }
    for j in 0..=m {
        dp[idx(0, j)] = (j, 0);
    }
    let better = |a: (usize, usize), b: (usize, usize)| a.0 < b.0 || (a.0 == b.0 && a.1 > b.1);
    for i in 1..=n {
        for j in 1..=m {
            let del = (dp[idx(i - 1, j)].0 + 1, dp[idx(i - 1, j)].1);
            let ins = (dp[idx(i, j - 1)].0 + 1, dp[idx(i, j - 1)].1);
            let diag = dp[idx(i - 1, j - 1)];
            let diag = if reference[i - 1] == hypothesis[j - 1] {
                diag
            } else {
                (diag.0 + 1, diag.1 + 1)
            };
            let mut best = del;
            if better(ins, best) {
                best = ins;
            }
            if better(diag, best) {
                best = diag;
            }
            dp[idx(i, j)] = best;
        }
    }

    let (distance, subs) = dp[idx(n, m)];
    // I + D = distance - S and I - D = m - n pin the remaining counts.
    let non_sub = distance - subs;
    let (ins, dels) = if m >= n {
        let ins = (non_sub + (m - n)) / 2;
        (ins, non_sub - ins)
    } else {
        let dels = (non_sub + (n - m)) / 2;
        (non_sub - dels, dels)
    };
    (subs, ins, dels)
}

/// Minimal edit-distance error rate between a reference and a hypothesis.
pub fn edit_distance_rate(
    reference: &str,
    hypothesis: &str,
    unit: EditUnit,
    normalization: Normalization,
) -> Result<ErrorRateReport, MetricsError> {
    let reference = normalize_text(reference, normalization);
    let hypothesis = normalize_text(hypothesis, normalization);
    let ref_units = units(&reference, unit);
    let hyp_units = units(&hypothesis, unit);
    if ref_units.is_empty() {
        return Err(MetricsError::EmptyReference);
    }
    let (substitutions, insertions, deletions) = edit_counts(&ref_units, &hyp_units);
    let reference_length = ref_units.len();
    let rate = (substitutions + insertions + deletions) as f64 / reference_length as f64;
    Ok(ErrorRateReport {
        substitutions,
        insertions,
        deletions,
        reference_length,
        rate,
        unit,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum DetectedLanguage {
    En,
    Zh,
    Other,
}

impl From<Language> for DetectedLanguage {
    fn from(l: Language) -> Self {
        match l {
            Language::En => DetectedLanguage::En,
            Language::Zh => DetectedLanguage::Zh,
        }
    }
}

/// Pluggable language detection; external tools can stand in for the
/// built-in script-ratio heuristic.
pub trait LanguageDetector {
    fn detect(&self, text: &str) -> DetectedLanguage;
}

/// Script-ratio heuristic: Han-character ratio above the threshold means
/// Chinese, otherwise a Latin-letter ratio above it means English. Ratios
/// are taken over non-whitespace, non-punctuation characters.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ScriptRatioDetector {
    pub threshold: f64,
}

impl Default for ScriptRatioDetector {
    fn default() -> Self {
        ScriptRatioDetector { threshold: 0.3 }
    }
}

fn is_han(c: char) -> bool {
    matches!(u32::from(c),
        0x4E00..=0x9FFF | 0x3400..=0x4DBF | 0x20000..=0x2A6DF | 0xF900..=0xFAFF)
}

fn is_latin_letter(c: char) -> bool {
    c.is_ascii_alphabetic() || matches!(u32::from(c), 0xC0..=0x24F if c.is_alphabetic())
}

fn is_punctuation_like(c: char) -> bool {
    c.is_ascii_punctuation()
        || matches!(c, '…' | '。' | '，' | '；' | '：' | '！' | '？')
        || matches!(c, '、' | '「' | '」' | '《' | '》' | '（' | '）' | '—' | '·')
}

impl LanguageDetector for ScriptRatioDetector {
    fn detect(&self, text: &str) -> DetectedLanguage {
        let scored: Vec<char> = text
            .chars()
            .filter(|c| !c.is_whitespace() && !is_punctuation_like(*c))
            .collect();
        if scored.is_empty() {
            return DetectedLanguage::Other;
        }
        let total = scored.len() as f64;
        let han = scored.iter().filter(|&&c| is_han(c)).count() as f64 / total;
        let latin = scored.iter().filter(|&&c| is_latin_letter(c)).count() as f64 / total;
        if han > self.threshold {
            DetectedLanguage::Zh
        } else if latin > self.threshold {
            DetectedLanguage::En
        } else {
            DetectedLanguage::Other
        }
    }
}

/// Detects with the default script-ratio heuristic.
pub fn detect_language(text: &str) -> DetectedLanguage {
    ScriptRatioDetector::default().detect(text)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OffTargetReport {
    pub total: usize,
    pub off_target_count: usize,
    /// Percentage in `[0, 100]`.
    pub ratio_percent: f64,
}

/// Fraction of responses whose detected language differs from the intended
/// one, as a percentage.
pub fn off_target_ratio_with<D: LanguageDetector + ?Sized>(
    responses: &[String],
    intended: Language,
    detector: &D,
) -> Result<OffTargetReport, MetricsError> {
    if responses.is_empty() {
        return Err(MetricsError::EmptyResponses);
    }
    let expected = DetectedLanguage::from(intended);
    let off_target_count = responses
        .iter()
        .filter(|r| detector.detect(r) != expected)
        .count();
    Ok(OffTargetReport {
        total: responses.len(),
        off_target_count,
        ratio_percent: 100.0 * off_target_count as f64 / responses.len() as f64,
    })
}

/// [`off_target_ratio_with`] using the built-in detector.
pub fn off_target_ratio(
    responses: &[String],
    intended: Language,
) -> Result<OffTargetReport, MetricsError> {
    off_target_ratio_with(responses, intended, &ScriptRatioDetector::default())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Pairing {
    Parallel,
    Random,
}

/// Mean cosine similarity under one pairing.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PairingSimilarity {
    pub pairing: Pairing,
    pub mean_cosine: f64,
    pub pair_count: usize,
}

/// Parallel and random means side by side, as the similarity study reports
/// them.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimilarityReport {
    pub parallel_mean_cosine: f64,
    pub random_mean_cosine: f64,
    pub pair_count: usize,
}

fn squared_norm(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum()
}

/// Cosine via the squared form, so identical vectors give exactly 1.0 and
/// negated ones exactly -1.0.
fn cosine(a: &[f64], b: &[f64]) -> f64 {
    let dot: f64 = a.iter().zip(b).map(|(x, y)| x * y).sum();
    if dot == 0.0 {
        return 0.0;
    }
    let ratio = (dot * dot / (squared_norm(a) * squared_norm(b))).min(1.0);
    ratio.sqrt().copysign(dot)
}

fn validate_vectors(
    vectors_a: &[Vec<f64>],
    vectors_b: &[Vec<f64>],
) -> Result<(), MetricsError> {
    if vectors_a.len() != vectors_b.len() {
        return Err(MetricsError::LengthMismatch {
            a: vectors_a.len(),
            b: vectors_b.len(),
        });
    }
    for (index, (a, b)) in vectors_a.iter().zip(vectors_b).enumerate() {
        if a.len() != b.len() {
            return Err(MetricsError::DimensionMismatch {
                index,
                a: a.len(),
                b: b.len(),
            });
        }
        if squared_norm(a) == 0.0 {
            return Err(MetricsError::ZeroVector { list: 'a', index });
        }
        if squared_norm(b) == 0.0 {
            return Err(MetricsError::ZeroVector { list: 'b', index });
        }
    }
    Ok(())
}

/// Seeded derangement: a uniform random cyclic permutation (Sattolo), which
/// by construction maps no index to itself.
fn derangement(n: usize, seed: u64) -> Vec<usize> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut perm: Vec<usize> = (0..n).collect();
    let mut i = n;
    while i > 1 {
        i -= 1;
        let j = rng.random_range(0..i);
        perm.swap(i, j);
    }
    perm
}

/// Mean cosine similarity between the two vector lists under the requested
/// pairing: index-wise for `Parallel`, against a seeded derangement for
/// `Random`.
pub fn representation_similarity(
    vectors_a: &[Vec<f64>],
    vectors_b: &[Vec<f64>],
    pairing: Pairing,
    seed: u64,
) -> Result<PairingSimilarity, MetricsError> {
    validate_vectors(vectors_a, vectors_b)?;
    let n = vectors_a.len();
    if n == 0 {
        return Err(MetricsError::EmptyResponses);
    }
    let sum: f64 = match pairing {
        Pairing::Parallel => (0..n).map(|i| cosine(&vectors_a[i], &vectors_b[i])).sum(),
        Pairing::Random => {
            if n < 2 {
                return Err(MetricsError::TooFewForRandomPairing);
            }
            let perm = derangement(n, seed);
            (0..n).map(|i| cosine(&vectors_a[i], &vectors_b[perm[i]])).sum()
        }
    };
    Ok(PairingSimilarity {
        pairing,
        mean_cosine: sum / n as f64,
        pair_count: n,
    })
}

/// Runs both pairings over the same lists.
pub fn similarity_report(
    vectors_a: &[Vec<f64>],
    vectors_b: &[Vec<f64>],
    seed: u64,
) -> Result<SimilarityReport, MetricsError> {
    let parallel = representation_similarity(vectors_a, vectors_b, Pairing::Parallel, seed)?;
    let random = representation_similarity(vectors_a, vectors_b, Pairing::Random, seed)?;
    Ok(SimilarityReport {
        parallel_mean_cosine: parallel.mean_cosine,
        random_mean_cosine: random.mean_cosine,
        pair_count: parallel.pair_count,
    })
}
