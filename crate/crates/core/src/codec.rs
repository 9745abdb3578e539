//! Run-length coding of discrete speech token sequences.
//!
//! Consecutive repeated speech tokens are merged into `(token, count)` runs
//! before a sequence is fed to the language model, and expanded back before
//! synthesis. The coding is lossless: counts are unbounded and always
//! retained, so `expand_runs(merge_runs(s)) == s` for every sequence.

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Default size of the discrete speech vocabulary.
pub const DEFAULT_VOCAB_SIZE: u32 = 4096;

/// Default rate of expanded speech tokens, in tokens per second.
pub const DEFAULT_FRAME_RATE_HZ: f64 = 25.0;

#[derive(Debug, Error, PartialEq)]
pub enum CodecError {
    #[error("token {token} at index {index} is outside the vocabulary (vocab_size {vocab_size})")]
    InvalidToken {
        index: usize,
        token: u32,
        vocab_size: u32,
    },
    #[error("run {index} has count 0; counts must be >= 1")]
    InvalidCount { index: usize },
    #[error("tokens and counts have mismatched lengths ({tokens} vs {counts})")]
    ShapeMismatch { tokens: usize, counts: usize },
    #[error("vocab_size must be positive")]
    EmptyVocab,
    #[error("frame_rate_hz must be positive, got {0}")]
    InvalidFrameRate(f64),
}

/// Raw discrete speech tokens at a fixed frame rate; the currency of the
/// whole pipeline.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpeechTokenSequence {
    pub tokens: Vec<u32>,
    pub vocab_size: u32,
    pub frame_rate_hz: f64,
}

impl SpeechTokenSequence {
    /// Builds a sequence over the default 4096-token vocabulary at 25 Hz.
    pub fn new(tokens: Vec<u32>) -> Result<Self, CodecError> {
        Self::with_vocab(tokens, DEFAULT_VOCAB_SIZE)
    }

    pub fn with_vocab(tokens: Vec<u32>, vocab_size: u32) -> Result<Self, CodecError> {
        let seq = SpeechTokenSequence {
            tokens,
            vocab_size,
            frame_rate_hz: DEFAULT_FRAME_RATE_HZ,
        };
        seq.validate()?;
        Ok(seq)
    }

    pub fn validate(&self) -> Result<(), CodecError> {
        if self.vocab_size == 0 {
            return Err(CodecError::EmptyVocab);
        }
        if self.frame_rate_hz <= 0.0 || self.frame_rate_hz.is_nan() {
            return Err(CodecError::InvalidFrameRate(self.frame_rate_hz));
        }
        for (index, &token) in self.tokens.iter().enumerate() {
            if token >= self.vocab_size {
                return Err(CodecError::InvalidToken {
                    index,
                    token,
                    vocab_size: self.vocab_size,
                });
            }
        }
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.tokens.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tokens.is_empty()
    }
}

/// One run of a merged sequence: `token` repeated `count` times.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct TokenRun {
    pub token: u32,
    pub count: u32,
}

/// A run-length coded speech token sequence. Adjacent runs never share a
/// token id and every count is at least 1.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MergedTokenSequence {
    pub runs: Vec<TokenRun>,
    pub vocab_size: u32,
    pub frame_rate_hz: f64,
}

impl MergedTokenSequence {
    /// Token ids of the runs, one per run.
    pub fn run_tokens(&self) -> Vec<u32> {
        self.runs.iter().map(|r| r.token).collect()
    }

    /// Repeat counts of the runs, one per run.
    pub fn run_counts(&self) -> Vec<u32> {
        self.runs.iter().map(|r| r.count).collect()
    }

    /// Total expanded length (sum of counts).
    pub fn expanded_len(&self) -> usize {
        self.runs.iter().map(|r| r.count as usize).sum()
    }
}

/// Merges consecutive repeated tokens into runs.
pub fn merge_runs(seq: &SpeechTokenSequence) -> Result<MergedTokenSequence, CodecError> {
    seq.validate()?;
    let mut runs: Vec<TokenRun> = Vec::new();
    for &token in &seq.tokens {
        match runs.last_mut() {
            Some(run) if run.token == token => run.count += 1,
            _ => runs.push(TokenRun { token, count: 1 }),
        }
    }
    Ok(MergedTokenSequence {
        runs,
        vocab_size: seq.vocab_size,
        frame_rate_hz: seq.frame_rate_hz,
    })
}

/// Expands runs back into the flat token sequence.
pub fn expand_runs(merged: &MergedTokenSequence) -> Result<SpeechTokenSequence, CodecError> {
    let mut tokens = Vec::with_capacity(merged.expanded_len());
    for (index, run) in merged.runs.iter().enumerate() {
        if run.count == 0 {
            return Err(CodecError::InvalidCount { index });
        }
        if run.token >= merged.vocab_size {
            return Err(CodecError::InvalidToken {
                index,
                token: run.token,
                vocab_size: merged.vocab_size,
            });
        }
        tokens.extend(std::iter::repeat_n(run.token, run.count as usize));
    }
    Ok(SpeechTokenSequence {
        tokens,
        vocab_size: merged.vocab_size,
        frame_rate_hz: merged.frame_rate_hz,
    })
}

/// Expands `tokens` by repeating each one its predicted `counts` times.
///
/// This is the synthesis-side application of duration-model predictions; the
/// counts need not match the true run lengths, so the output is a plain
/// token vector rather than a validated sequence.
pub fn expand_with_counts(tokens: &[u32], counts: &[u32]) -> Result<Vec<u32>, CodecError> {
    if tokens.len() != counts.len() {
        return Err(CodecError::ShapeMismatch {
            tokens: tokens.len(),
            counts: counts.len(),
        });
    }
    let total: usize = counts.iter().map(|&c| c as usize).sum();
    let mut out = Vec::with_capacity(total);
    for (index, (&token, &count)) in tokens.iter().zip(counts).enumerate() {
        if count == 0 {
            return Err(CodecError::InvalidCount { index });
        }
        out.extend(std::iter::repeat_n(token, count as usize));
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn seq(tokens: Vec<u32>) -> SpeechTokenSequence {
        SpeechTokenSequence::with_vocab(tokens, 16).unwrap()
    }

    #[test]
    fn merge_basic() {
        let merged = merge_runs(&seq(vec![5, 5, 5, 9, 9, 5])).unwrap();
        assert_eq!(
            merged.runs,
            vec![
                TokenRun { token: 5, count: 3 },
                TokenRun { token: 9, count: 2 },
                TokenRun { token: 5, count: 1 },
            ]
        );
    }

    #[test]
    fn merge_empty() {
        let merged = merge_runs(&seq(vec![])).unwrap();
        assert!(merged.runs.is_empty());
        assert_eq!(expand_runs(&merged).unwrap().tokens, Vec::<u32>::new());
    }

    #[test]
    fn merge_rejects_out_of_vocab_token() {
        let mut s = seq(vec![1, 2, 3]);
        s.tokens[1] = 99;
        assert_eq!(
            merge_runs(&s),
            Err(CodecError::InvalidToken {
                index: 1,
                token: 99,
                vocab_size: 16
            })
        );
    }

    #[test]
    fn expand_basic() {
        let merged = MergedTokenSequence {
            runs: vec![
                TokenRun { token: 7, count: 2 },
                TokenRun { token: 3, count: 1 },
            ],
            vocab_size: 16,
            frame_rate_hz: 25.0,
        };
        assert_eq!(expand_runs(&merged).unwrap().tokens, vec![7, 7, 3]);
    }

    #[test]
    fn expand_singleton() {
        let merged = MergedTokenSequence {
            runs: vec![TokenRun { token: 4, count: 1 }],
            vocab_size: 16,
            frame_rate_hz: 25.0,
        };
        assert_eq!(expand_runs(&merged).unwrap().tokens, vec![4]);
    }

    #[test]
    fn expand_rejects_zero_count() {
        let merged = MergedTokenSequence {
            runs: vec![TokenRun { token: 4, count: 0 }],
            vocab_size: 16,
            frame_rate_hz: 25.0,
        };
        assert_eq!(expand_runs(&merged), Err(CodecError::InvalidCount { index: 0 }));
    }

    #[test]
    fn expand_with_counts_basic() {
        assert_eq!(expand_with_counts(&[1, 2], &[3, 1]).unwrap(), vec![1, 1, 1, 2]);
        assert_eq!(expand_with_counts(&[], &[]).unwrap(), Vec::<u32>::new());
    }

    #[test]
    fn expand_with_counts_shape_error() {
        assert_eq!(
            expand_with_counts(&[1, 2], &[3]),
            Err(CodecError::ShapeMismatch { tokens: 2, counts: 1 })
        );
    }

    #[test]
    fn expand_with_true_counts_roundtrips() {
        let s = seq(vec![1, 1, 4, 4, 4, 2, 1, 1]);
        let merged = merge_runs(&s).unwrap();
        let expanded =
            expand_with_counts(&merged.run_tokens(), &merged.run_counts()).unwrap();
        assert_eq!(expanded, s.tokens);
    }

    /// Exhaustive roundtrip over all sequences of length <= 6 on 3 tokens.
    #[test]
    fn roundtrip_exhaustive_small() {
        for len in 0..=6usize {
            let total = 3usize.pow(len as u32);
            for code in 0..total {
                let mut tokens = Vec::with_capacity(len);
                let mut c = code;
                for _ in 0..len {
                    tokens.push((c % 3) as u32);
                    c /= 3;
                }
                let s = SpeechTokenSequence::with_vocab(tokens, 3).unwrap();
                let merged = merge_runs(&s).unwrap();
                assert_eq!(expand_runs(&merged).unwrap(), s);
                // No two adjacent runs share a token id.
                for w in merged.runs.windows(2) {
                    assert_ne!(w[0].token, w[1].token);
                }
            }
        }
    }

    proptest! {
        #[test]
        fn roundtrip_random(tokens in proptest::collection::vec(0u32..16, 0..200)) {
            let s = seq(tokens);
            let merged = merge_runs(&s).unwrap();
            prop_assert_eq!(expand_runs(&merged).unwrap(), s);
        }

        #[test]
        fn merged_form_is_idempotent(tokens in proptest::collection::vec(0u32..8, 0..120)) {
            let merged = merge_runs(&seq(tokens)).unwrap();
            let remerged = merge_runs(&expand_runs(&merged).unwrap()).unwrap();
            prop_assert_eq!(remerged, merged);
        }

        #[test]
        fn length_law(tokens in proptest::collection::vec(0u32..4, 0..100)) {
            let s = seq(tokens);
            let merged = merge_runs(&s).unwrap();
            prop_assert!(merged.runs.len() <= s.tokens.len());
            let has_adjacent_repeat = s.tokens.windows(2).any(|w| w[0] == w[1]);
            prop_assert_eq!(merged.runs.len() == s.tokens.len(), !has_adjacent_repeat);
        }
    }
}
