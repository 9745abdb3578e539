//! CTC forced alignment.
//!
//! Given per-frame label log-probabilities and a reference label sequence,
//! [`force_align`] finds the highest-scoring frame-level path that collapses
//! to the reference (adjacent repeats deduplicated, then blanks removed) and
//! [`token_boundaries`] reads each label's temporal span off that path.
//!
//! The search runs over the standard expanded topology: blanks are
//! interleaved around the labels (`ε, y_1, ε, ..., y_L, ε`, so `2L+1`
//! states), transitions may stay, advance one state, or skip a blank between
//! two *different* labels, and paths must end in the final label or final
//! blank. This state set is exactly the set of frame paths that collapse to
//! the reference.
//!
//! Tie-breaking is emit-early: among maximum-score paths the one that
//! advances to the next state at the earliest frame wins. [`force_align`]
//! realizes this with a backward Viterbi pass followed by a greedy forward
//! reconstruction that prefers the furthest feasible advance, which yields
//! the lexicographically greatest optimal state sequence. The enumeration
//! oracle [`brute_force_align`] applies the same order, so the two agree on
//! ties as well as on scores.

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Maximum log-sum-exp deviation from 0 tolerated when validating that each
/// emission row is a normalized distribution.
pub const ROW_NORMALIZATION_TOLERANCE: f64 = 1e-6;

/// Default frame cap for [`brute_force_align`]; enumeration is `V^T`.
pub const BRUTE_FORCE_FRAME_CAP: usize = 10;

#[derive(Debug, Error, PartialEq)]
pub enum AlignError {
    #[error("emission matrix must have at least one frame")]
    EmptyEmissions,
    #[error("emission rows must all have the same width (row {row} has {got}, expected {expected})")]
    RaggedEmissions { row: usize, got: usize, expected: usize },
    #[error("blank index {blank} is outside the label vocabulary (size {vocab})")]
    InvalidBlank { blank: usize, vocab: usize },
    #[error("emission row {row} is not normalized: log-sum-exp is {lse:.3e}")]
    UnnormalizedRow { row: usize, lse: f64 },
    #[error("label sequence must be non-empty")]
    EmptyLabels,
    #[error("label {label} at position {position} equals the blank index")]
    BlankLabel { label: usize, position: usize },
    #[error("label {label} at position {position} is outside the vocabulary (size {vocab})")]
    LabelOutOfRange { label: usize, position: usize, vocab: usize },
    #[error("alignment infeasible: {frames} frames, but {labels} labels with {duplicate_pairs} adjacent duplicate pairs require at least {required} frames")]
    Infeasible {
        frames: usize,
        labels: usize,
        duplicate_pairs: usize,
        required: usize,
    },
    #[error("brute force refused: {frames} frames exceeds the enumeration cap of {cap}")]
    FrameCapExceeded { frames: usize, cap: usize },
    #[error("path of length {path_len} does not match the {frames}-frame emission matrix")]
    PathLengthMismatch { path_len: usize, frames: usize },
    #[error("path does not collapse to the given label sequence")]
    CollapseMismatch,
    #[error("invalid span ({start}, {end}) for {limit} frames at position {position}")]
    InvalidSpan {
        start: usize,
        end: usize,
        limit: usize,
        position: usize,
    },
    #[error("cannot fit {spans} spans into {tokens} tokens")]
    TooManySpans { spans: usize, tokens: usize },
    #[error("frame and token counts must be positive")]
    EmptyMapping,
}

/// Per-frame log-probability rows over a label vocabulary that includes the
/// blank symbol.
#[derive(Debug, Clone, PartialEq)]
pub struct EmissionMatrix {
    log_probs: Vec<f64>,
    frames: usize,
    vocab: usize,
    blank: usize,
}

impl EmissionMatrix {
    /// Builds the matrix from `frames x vocab` rows of log-probabilities.
    /// Each row must log-sum-exp to 0 within [`ROW_NORMALIZATION_TOLERANCE`].
    pub fn from_log_probs(rows: Vec<Vec<f64>>, blank: usize) -> Result<Self, AlignError> {
        if rows.is_empty() {
            return Err(AlignError::EmptyEmissions);
        }
        let vocab = rows[0].len();
        if blank >= vocab {
            return Err(AlignError::InvalidBlank { blank, vocab });
        }
        let mut log_probs = Vec::with_capacity(rows.len() * vocab);
        for (row, r) in rows.iter().enumerate() {
            if r.len() != vocab {
                return Err(AlignError::RaggedEmissions {
                    row,
                    got: r.len(),
                    expected: vocab,
                });
            }
            let lse = log_sum_exp(r);
            if lse.abs() > ROW_NORMALIZATION_TOLERANCE {
                return Err(AlignError::UnnormalizedRow { row, lse });
            }
            log_probs.extend_from_slice(r);
        }
        Ok(EmissionMatrix {
            log_probs,
            frames: rows.len(),
            vocab,
            blank,
        })
    }

    /// Builds the matrix from linear probabilities, taking logs.
    pub fn from_probs(rows: Vec<Vec<f64>>, blank: usize) -> Result<Self, AlignError> {
        let log_rows = rows
            .into_iter()
            .map(|r| r.into_iter().map(|p| p.ln()).collect())
            .collect();
        Self::from_log_probs(log_rows, blank)
    }

    pub fn frames(&self) -> usize {
        self.frames
    }

    pub fn vocab(&self) -> usize {
        self.vocab
    }

    pub fn blank(&self) -> usize {
        self.blank
    }

    #[inline]
    pub fn log_prob(&self, frame: usize, label: usize) -> f64 {
        self.log_probs[frame * self.vocab + label]
    }

    pub fn row(&self, frame: usize) -> &[f64] {
        &self.log_probs[frame * self.vocab..(frame + 1) * self.vocab]
    }
}

fn log_sum_exp(values: &[f64]) -> f64 {
    let max = values.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    if max == f64::NEG_INFINITY {
        return f64::NEG_INFINITY;
    }
    let sum: f64 = values.iter().map(|v| (v - max).exp()).sum();
    max + sum.ln()
}

/// A non-empty sequence of non-blank reference labels.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LabelSequence {
    labels: Vec<usize>,
}

impl LabelSequence {
    pub fn new(labels: Vec<usize>) -> Result<Self, AlignError> {
        if labels.is_empty() {
            return Err(AlignError::EmptyLabels);
        }
        Ok(LabelSequence { labels })
    }

    pub fn labels(&self) -> &[usize] {
        &self.labels
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    /// Number of adjacent positions holding the same label; each needs a
    /// separating blank frame.
    pub fn duplicate_pairs(&self) -> usize {
        self.labels.windows(2).filter(|w| w[0] == w[1]).count()
    }

    fn validate_against(&self, vocab: usize, blank: usize) -> Result<(), AlignError> {
        for (position, &label) in self.labels.iter().enumerate() {
            if label == blank {
                return Err(AlignError::BlankLabel { label, position });
            }
            if label >= vocab {
                return Err(AlignError::LabelOutOfRange { label, position, vocab });
            }
        }
        Ok(())
    }
}

/// The blank-interleaved state sequence `ε, y_1, ε, ..., y_L, ε`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ExpandedLabels {
    states: Vec<usize>,
}

impl ExpandedLabels {
    pub fn states(&self) -> &[usize] {
        &self.states
    }

    pub fn len(&self) -> usize {
        self.states.len()
    }

    pub fn is_empty(&self) -> bool {
        self.states.is_empty()
    }
}

/// Interleaves blanks around the labels, yielding `2L + 1` states.
pub fn expand_labels(y: &LabelSequence, blank: usize) -> Result<ExpandedLabels, AlignError> {
    for (position, &label) in y.labels().iter().enumerate() {
        if label == blank {
            return Err(AlignError::BlankLabel { label, position });
        }
    }
    let mut states = Vec::with_capacity(2 * y.len() + 1);
    states.push(blank);
    for &label in y.labels() {
        states.push(label);
        states.push(blank);
    }
    Ok(ExpandedLabels { states })
}

/// A frame-level alignment: one label id (possibly blank) per frame, plus
/// the summed log-probability of the path.
#[derive(Debug, Clone, PartialEq)]
pub struct AlignmentPath {
    pub path: Vec<usize>,
    pub score: f64,
}

/// Inclusive frame spans, one per reference label, strictly ordered and
/// disjoint.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TokenBoundaries {
    pub spans: Vec<(usize, usize)>,
}

/// Removes adjacent repeats, then blanks. The collapsing function `B`.
pub fn collapse(path: &[usize], blank: usize) -> Vec<usize> {
    let mut out = Vec::new();
    let mut prev: Option<usize> = None;
    for &label in path {
        if prev != Some(label) && label != blank {
            out.push(label);
        }
        prev = Some(label);
    }
    out
}

/// Valid successor states of `s` in the expanded topology.
#[inline]
fn successors(s: usize, states: &[usize], blank: usize) -> [Option<usize>; 3] {
    let n = states.len();
    let mut out = [Some(s), None, None];
    if s + 1 < n {
        out[1] = Some(s + 1);
    }
    // Skipping the blank between two labels is allowed only when they differ.
    if s + 2 < n && states[s] != blank && states[s + 2] != states[s] {
        out[2] = Some(s + 2);
    }
    out
}

fn check_feasibility(em: &EmissionMatrix, y: &LabelSequence) -> Result<(), AlignError> {
    let required = y.len() + y.duplicate_pairs();
    if em.frames() < required {
        return Err(AlignError::Infeasible {
            frames: em.frames(),
            labels: y.len(),
            duplicate_pairs: y.duplicate_pairs(),
            required,
        });
    }
    Ok(())
}

/// Finds the maximum-score frame path collapsing to `y`.
///
/// The reported score is recomputed as the front-to-back sum of the chosen
/// path's per-frame log-probabilities, so it is bit-identical to the score
/// an enumeration over the same path would produce.
pub fn force_align(em: &EmissionMatrix, y: &LabelSequence) -> Result<AlignmentPath, AlignError> {
    y.validate_against(em.vocab(), em.blank())?;
    check_feasibility(em, y)?;

    let expanded = expand_labels(y, em.blank())?;
    let states = expanded.states();
    let n_states = states.len();
    let frames = em.frames();

    // Backward pass: best[t][s] = best completion score from state s at
    // frame t (including the emission at t); feasible[t][s] marks states
    // that can still reach a valid end state.
    let mut best = vec![f64::NEG_INFINITY; frames * n_states];
    let mut feasible = vec![false; frames * n_states];
    let idx = |t: usize, s: usize| t * n_states + s;

    let t_last = frames - 1;
    for s in [n_states - 1, n_states.saturating_sub(2)] {
        best[idx(t_last, s)] = em.log_prob(t_last, states[s]);
        feasible[idx(t_last, s)] = true;
    }

    for t in (0..t_last).rev() {
        for s in 0..n_states {
            let mut best_next = f64::NEG_INFINITY;
            let mut any_feasible = false;
            for next in successors(s, states, em.blank()).into_iter().flatten() {
                if feasible[idx(t + 1, next)] {
                    any_feasible = true;
                    if best[idx(t + 1, next)] > best_next {
                        best_next = best[idx(t + 1, next)];
                    }
                }
            }
            if any_feasible {
                feasible[idx(t, s)] = true;
                best[idx(t, s)] = em.log_prob(t, states[s]) + best_next;
            }
        }
    }

    // Greedy forward reconstruction: among score-optimal feasible choices,
    // always take the largest state index, i.e. advance as early as possible.
    let mut state = usize::MAX;
    let mut state_score = f64::NEG_INFINITY;
    for s in [0usize, 1] {
        if feasible[idx(0, s)] && (state == usize::MAX || best[idx(0, s)] >= state_score) {
            state = s;
            state_score = best[idx(0, s)];
        }
    }
    if state == usize::MAX {
        // Unreachable when the feasibility precheck passed.
        return Err(AlignError::Infeasible {
            frames,
            labels: y.len(),
            duplicate_pairs: y.duplicate_pairs(),
            required: y.len() + y.duplicate_pairs(),
        });
    }

    let mut path = Vec::with_capacity(frames);
    path.push(states[state]);
    for t in 1..frames {
        let mut chosen = usize::MAX;
        let mut chosen_score = f64::NEG_INFINITY;
        for next in successors(state, states, em.blank()).into_iter().flatten() {
            if feasible[idx(t, next)]
                && (chosen == usize::MAX || best[idx(t, next)] >= chosen_score)
            {
                chosen = next;
                chosen_score = best[idx(t, next)];
            }
        }
        debug_assert_ne!(chosen, usize::MAX);
        state = chosen;
        path.push(states[state]);
    }

    let score = path_score(em, &path);
    Ok(AlignmentPath { path, score })
}

fn path_score(em: &EmissionMatrix, path: &[usize]) -> f64 {
    path.iter()
        .enumerate()
        .map(|(t, &label)| em.log_prob(t, label))
        .sum()
}

/// Maps a valid frame path to its unique state sequence over the expanded
/// labels, or `None` if the path is not a forced alignment of `y`.
fn state_sequence(path: &[usize], states: &[usize], blank: usize) -> Option<Vec<usize>> {
    let mut seq = Vec::with_capacity(path.len());
    let mut state = match path.first() {
        Some(&l) if l == states[0] => 0,
        Some(&l) if l == states[1] => 1,
        _ => return None,
    };
    seq.push(state);
    for &label in &path[1..] {
        let mut found = None;
        for next in successors(state, states, blank).into_iter().flatten() {
            if states[next] == label {
                found = Some(next);
                break;
            }
        }
        state = found?;
        seq.push(state);
    }
    // All labels consumed: the path must end in the final label or blank.
    if state + 2 >= states.len() {
        Some(seq)
    } else {
        None
    }
}

/// Enumerates every `V^T` frame assignment, keeps those collapsing to `y`,
/// and returns the maximum-score one under the shared emit-early tie-break.
///
/// Test oracle for [`force_align`]; refuses inputs above `cap` frames.
pub fn brute_force_align_capped(
    em: &EmissionMatrix,
    y: &LabelSequence,
    cap: usize,
) -> Result<AlignmentPath, AlignError> {
    if em.frames() > cap {
        return Err(AlignError::FrameCapExceeded {
            frames: em.frames(),
            cap,
        });
    }
    y.validate_against(em.vocab(), em.blank())?;
    check_feasibility(em, y)?;

    let expanded = expand_labels(y, em.blank())?;
    let states = expanded.states();
    let frames = em.frames();
    let vocab = em.vocab();

    let mut current = vec![0usize; frames];
    let mut best: Option<(f64, Vec<usize>, Vec<usize>)> = None;
    loop {
        if collapse(&current, em.blank()) == y.labels() {
            if let Some(seq) = state_sequence(&current, states, em.blank()) {
                let score = path_score(em, &current);
                let better = match &best {
                    None => true,
                    Some((best_score, best_seq, _)) => {
                        score > *best_score || (score == *best_score && seq > *best_seq)
                    }
                };
                if better {
                    best = Some((score, seq, current.clone()));
                }
            }
        }
        // Odometer increment over label assignments.
        let mut pos = 0;
        loop {
            if pos == frames {
                let (score, _, path) = best.ok_or(AlignError::Infeasible {
                    frames,
                    labels: y.len(),
                    duplicate_pairs: y.duplicate_pairs(),
                    required: y.len() + y.duplicate_pairs(),
                })?;
                return Ok(AlignmentPath { path, score });
            }
            current[pos] += 1;
            if current[pos] < vocab {
                break;
            }
            current[pos] = 0;
            pos += 1;
        }
    }
}

/// [`brute_force_align_capped`] with the default [`BRUTE_FORCE_FRAME_CAP`].
pub fn brute_force_align(em: &EmissionMatrix, y: &LabelSequence) -> Result<AlignmentPath, AlignError> {
    brute_force_align_capped(em, y, BRUTE_FORCE_FRAME_CAP)
}

/// Reads each label occurrence's contiguous frame block off the path.
///
/// Spans are occurrence-indexed: the l-th span covers the block of frames
/// emitting the l-th reference label, so repeated label values yield
/// separate, strictly ordered spans.
pub fn token_boundaries(
    path: &AlignmentPath,
    y: &LabelSequence,
    blank: usize,
) -> Result<TokenBoundaries, AlignError> {
    let mut spans = Vec::with_capacity(y.len());
    let mut occurrence = 0usize;
    let mut t = 0usize;
    let labels = y.labels();
    while t < path.path.len() {
        let label = path.path[t];
        let start = t;
        while t < path.path.len() && path.path[t] == label {
            t += 1;
        }
        if label == blank {
            continue;
        }
        if occurrence >= labels.len() || labels[occurrence] != label {
            return Err(AlignError::CollapseMismatch);
        }
        spans.push((start, t - 1));
        occurrence += 1;
    }
    if occurrence != labels.len() {
        return Err(AlignError::CollapseMismatch);
    }
    Ok(TokenBoundaries { spans })
}

/// Rescales frame-indexed spans into token-index space.
///
/// Each frame index maps to `floor(t * t_tokens / t_frames)`; starts are
/// then pushed forward so spans stay strictly ordered and disjoint, and the
/// final span is extended to the last token so the spans plus their gaps
/// cover the whole token range.
pub fn map_frames_to_token_indices(
    boundaries: &TokenBoundaries,
    t_frames: usize,
    t_tokens: usize,
) -> Result<TokenBoundaries, AlignError> {
    if t_frames == 0 || t_tokens == 0 {
        return Err(AlignError::EmptyMapping);
    }
    let n = boundaries.spans.len();
    if n > t_tokens {
        return Err(AlignError::TooManySpans { spans: n, tokens: t_tokens });
    }
    let mut prev_end: Option<usize> = None;
    for (position, &(start, end)) in boundaries.spans.iter().enumerate() {
        let ordered = prev_end.is_none_or(|p| p < start);
        if start > end || end >= t_frames || !ordered {
            return Err(AlignError::InvalidSpan {
                start,
                end,
                limit: t_frames,
                position,
            });
        }
        prev_end = Some(end);
    }

    let scale = |t: usize| t * t_tokens / t_frames;
    let mut spans: Vec<(usize, usize)> = Vec::with_capacity(n);
    for (i, &(start, end)) in boundaries.spans.iter().enumerate() {
        // Leave room for the remaining spans so disjointness stays feasible.
        let max_start = t_tokens - (n - i);
        let min_start = spans.last().map_or(0, |&(_, e)| e + 1);
        let s = scale(start).max(min_start).min(max_start);
        let e = scale(end).max(s).min(max_start);
        spans.push((s, e));
    }
    if let Some(last) = spans.last_mut() {
        last.1 = t_tokens - 1;
    }
    Ok(TokenBoundaries { spans })
}
