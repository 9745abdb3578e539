//! Punctuation-based text chunking and speech-span assignment.
//!
//! A response text is cut into chunks at punctuation marks, but only once the
//! running segment has accumulated at least `min_words` words (7 by default);
//! the final chunk may be shorter. Each chunk is then attached to its span of
//! speech tokens using per-word alignment boundaries, with inter-word gaps
//! split at the midpoint so chunk spans partition the full token range.
//!
//! Words are whitespace-delimited tokens for English and individual Han
//! characters for Chinese; punctuation stays with the preceding chunk.

use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::ctc::TokenBoundaries;
use crate::Language;

#[derive(Debug, Error, PartialEq)]
pub enum ChunkError {
    #[error("input text is empty after trimming")]
    EmptyText,
    #[error("input text contains no countable words")]
    NoWords,
    #[error("chunking config invalid: {0}")]
    InvalidConfig(String),
    #[error("chunks cover {chunk_words} words but {boundary_spans} word boundaries were given")]
    WordCountMismatch {
        chunk_words: usize,
        boundary_spans: usize,
    },
    #[error("chunk word spans do not partition the word indices at chunk {0}")]
    BrokenWordPartition(usize),
    #[error("word boundaries exceed the token range: span ({start}, {end}) vs {total_tokens} tokens")]
    BoundaryOutOfRange {
        start: usize,
        end: usize,
        total_tokens: usize,
    },
}

/// Punctuation marks that admit a cut, covering both scripts.
pub fn default_punctuation() -> BTreeSet<char> {
    [
        '.', ',', ';', ':', '!', '?', '…', '。', '，', '；', '：', '！', '？',
    ]
    .into_iter()
    .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChunkingConfig {
    pub min_words: usize,
    pub punctuation: BTreeSet<char>,
    pub language: Language,
}

impl ChunkingConfig {
    pub fn new(language: Language) -> Self {
        ChunkingConfig {
            min_words: 7,
            punctuation: default_punctuation(),
            language,
        }
    }

    fn validate(&self) -> Result<(), ChunkError> {
        if self.min_words == 0 {
            return Err(ChunkError::InvalidConfig("min_words must be >= 1".into()));
        }
        if self.punctuation.is_empty() {
            return Err(ChunkError::InvalidConfig("punctuation set is empty".into()));
        }
        Ok(())
    }
}

impl Default for ChunkingConfig {
    fn default() -> Self {
        ChunkingConfig::new(Language::En)
    }
}

/// One text chunk with its word range and, once assigned, its speech-token
/// span.
///
/// `separator` holds the whitespace that followed the chunk in the original
/// text, so concatenating `text + separator` over all chunks reproduces the
/// input byte-for-byte.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TextChunk {
    pub text: String,
    pub separator: String,
    /// Inclusive (first, last) word indices covered by this chunk.
    pub word_span: (usize, usize),
    /// Inclusive (first, last) speech-token indices; `None` until assigned.
    pub token_span: Option<(usize, usize)>,
}

/// Number of countable words in `text`: whitespace-delimited tokens for
/// English, Han characters for Chinese. Matches the chunker's indexing and
/// the per-word alignment label convention.
pub fn count_words(text: &str, language: Language) -> usize {
    match language {
        Language::En => text.split_whitespace().count(),
        Language::Zh => text.chars().filter(|&c| is_han(c)).count(),
    }
}

/// Joins chunk texts with their separators, reproducing the original input.
pub fn reconstruct_text(chunks: &[TextChunk]) -> String {
    let mut out = String::new();
    for chunk in chunks {
        out.push_str(&chunk.text);
        out.push_str(&chunk.separator);
    }
    out
}

/// A scanning unit: for English a whitespace-delimited token, for Chinese a
/// single character. `is_word` marks units that count toward `min_words`.
struct Unit<'a> {
    text: &'a str,
    separator: &'a str,
    is_word: bool,
    /// The unit ends with a punctuation character, admitting a cut after it.
    cut_after: bool,
}

fn scan_units<'a>(text: &'a str, cfg: &ChunkingConfig) -> Vec<Unit<'a>> {
    let mut units = Vec::new();
    match cfg.language {
        Language::En => {
            // Leading whitespace is folded into the first token's text so
            // reconstruction stays byte-exact.
            let mut pos = text
                .find(|c: char| !c.is_whitespace())
                .unwrap_or(text.len());
            while pos < text.len() {
                let rest = &text[pos..];
                let token_len = rest.find(char::is_whitespace).unwrap_or(rest.len());
                let sep_start = pos + token_len;
                let tail = &text[sep_start..];
                let sep_len = tail
                    .find(|c: char| !c.is_whitespace())
                    .unwrap_or(tail.len());
                let token_begin = if units.is_empty() { 0 } else { pos };
                let token = &text[token_begin..sep_start];
                units.push(Unit {
                    text: token,
                    separator: &text[sep_start..sep_start + sep_len],
                    is_word: true,
                    cut_after: token
                        .chars()
                        .next_back()
                        .is_some_and(|c| cfg.punctuation.contains(&c)),
                });
                pos = sep_start + sep_len;
            }
        }
        Language::Zh => {
            let mut iter = text.char_indices().peekable();
            while let Some((start, c)) = iter.next() {
                let end = iter.peek().map(|&(i, _)| i).unwrap_or(text.len());
                units.push(Unit {
                    text: &text[start..end],
                    separator: "",
                    is_word: is_han(c),
                    cut_after: cfg.punctuation.contains(&c),
                });
            }
        }
    }
    units
}

fn is_han(c: char) -> bool {
    matches!(u32::from(c),
        0x4E00..=0x9FFF        // CJK Unified Ideographs
        | 0x3400..=0x4DBF      // Extension A
        | 0x20000..=0x2A6DF    // Extension B
        | 0xF900..=0xFAFF      // CJK Compatibility Ideographs
    )
}

/// Segments `text` into chunks, cutting after punctuation once at least
/// `cfg.min_words` words have accumulated since the previous cut.
pub fn segment_text(text: &str, cfg: &ChunkingConfig) -> Result<Vec<TextChunk>, ChunkError> {
    cfg.validate()?;
    if text.trim().is_empty() {
        return Err(ChunkError::EmptyText);
    }
    let units = scan_units(text, cfg);
    let total_words: usize = units.iter().filter(|u| u.is_word).count();
    if total_words == 0 {
        return Err(ChunkError::NoWords);
    }

    let mut chunks: Vec<TextChunk> = Vec::new();
    let mut current = String::new();
    let mut pending_separator = String::new();
    let mut words_in_current = 0usize;
    let mut first_word = 0usize;
    let mut next_word = 0usize;

    for (i, unit) in units.iter().enumerate() {
        current.push_str(&pending_separator);
        pending_separator.clear();
        current.push_str(unit.text);
        if unit.is_word {
            words_in_current += 1;
            next_word += 1;
        }
        pending_separator.push_str(unit.separator);

        // For Chinese, only cut after a maximal punctuation run so the next
        // chunk never opens with a stray mark.
        let run_continues = matches!(cfg.language, Language::Zh)
            && units.get(i + 1).is_some_and(|u| u.cut_after);
        let is_last = i + 1 == units.len();
        if unit.cut_after && !run_continues && !is_last && words_in_current >= cfg.min_words {
            chunks.push(TextChunk {
                text: std::mem::take(&mut current),
                separator: std::mem::take(&mut pending_separator),
                word_span: (first_word, next_word - 1),
                token_span: None,
            });
            first_word = next_word;
            words_in_current = 0;
        }
    }

    if words_in_current > 0 {
        chunks.push(TextChunk {
            text: current,
            separator: pending_separator,
            word_span: (first_word, next_word - 1),
            token_span: None,
        });
    } else if !current.is_empty() || !pending_separator.is_empty() {
        // A wordless tail (e.g. trailing punctuation after a cut) is folded
        // into the previous chunk rather than emitted on its own.
        let last = chunks.last_mut().expect("a cut chunk precedes any tail");
        last.text.push_str(&last.separator);
        last.text.push_str(&current);
        last.separator = pending_separator;
    }

    Ok(chunks)
}

/// Attaches each chunk to its speech-token span.
///
/// `word_boundaries` holds one token-space span per word. A chunk's raw span
/// runs from its first word's start to its last word's end; gaps between
/// consecutive chunks are then split at the midpoint (left-biased on odd
/// gaps), the first span is pulled back to token 0, and the last is extended
/// to `total_tokens - 1`, so the assigned spans partition the token range.
pub fn assign_speech_spans(
    chunks: &[TextChunk],
    word_boundaries: &TokenBoundaries,
    total_tokens: usize,
) -> Result<Vec<TextChunk>, ChunkError> {
    let chunk_words: usize = chunks
        .iter()
        .map(|c| c.word_span.1 - c.word_span.0 + 1)
        .sum();
    if chunk_words != word_boundaries.spans.len() {
        return Err(ChunkError::WordCountMismatch {
            chunk_words,
            boundary_spans: word_boundaries.spans.len(),
        });
    }
    let mut expected_start = 0usize;
    for (i, chunk) in chunks.iter().enumerate() {
        if chunk.word_span.0 != expected_start || chunk.word_span.1 < chunk.word_span.0 {
            return Err(ChunkError::BrokenWordPartition(i));
        }
        expected_start = chunk.word_span.1 + 1;
    }
    for &(start, end) in &word_boundaries.spans {
        if end >= total_tokens || start > end {
            return Err(ChunkError::BoundaryOutOfRange {
                start,
                end,
                total_tokens,
            });
        }
    }

    let mut assigned: Vec<TextChunk> = chunks.to_vec();
    let mut raw: Vec<(usize, usize)> = chunks
        .iter()
        .map(|c| {
            let start = word_boundaries.spans[c.word_span.0].0;
            let end = word_boundaries.spans[c.word_span.1].1;
            (start, end)
        })
        .collect();

    raw[0].0 = 0;
    let n = raw.len();
    raw[n - 1].1 = total_tokens - 1;
    for i in 0..n - 1 {
        let gap = raw[i + 1].0.saturating_sub(raw[i].1 + 1);
        if gap > 0 {
            let left = gap - gap / 2; // left-biased on odd gaps
            raw[i].1 += left;
            raw[i + 1].0 -= gap / 2;
        }
    }

    for (chunk, span) in assigned.iter_mut().zip(raw) {
        chunk.token_span = Some(span);
    }
    Ok(assigned)
}
