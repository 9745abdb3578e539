//! Discrete-event simulation of interleaved vs full chain-of-modality
//! generation with playback overlap.
//!
//! Generation is autoregressive and therefore strictly serial. In the
//! interleaved mode each chunk's text and speech tokens are generated in
//! turn, and a chunk's synthesis may start as soon as its speech tokens
//! exist, so playback of early chunks overlaps generation of later ones. In
//! the full chain-of-modality mode the complete text answer precedes all
//! speech tokens and synthesis starts only once generation has finished,
//! streaming in the same chunk-sized blocks; the two modes differ only in
//! generation ordering.
//!
//! Synthesis is modeled per chunk (the decoder consumes whole token spans),
//! serialized on one synthesizer, and playback is serialized on the single
//! audio output.

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum ScheduleError {
    #[error("rates must be non-negative and the playback rate positive")]
    InvalidRates,
    #[error("plan must contain at least one chunk")]
    EmptyPlan,
    #[error("chunk {0} has a zero token count")]
    EmptyChunk(usize),
    #[error("trace has no playback events")]
    NoPlayback,
    #[error("totals must be positive")]
    InvalidTotals,
}

/// Seconds-per-token timing model.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RateModel {
    /// Seconds to generate one text token.
    pub seconds_per_text_token: f64,
    /// Seconds to generate one (merged) speech token.
    pub seconds_per_speech_token: f64,
    /// Seconds of synthesis per expanded speech token.
    pub synth_seconds_per_token: f64,
    /// Seconds of audio per expanded speech token (1/25 by default).
    pub playback_seconds_per_token: f64,
}

impl Default for RateModel {
    fn default() -> Self {
        RateModel {
            seconds_per_text_token: 0.01,
            seconds_per_speech_token: 0.01,
            synth_seconds_per_token: 0.002,
            playback_seconds_per_token: 1.0 / 25.0,
        }
    }
}

impl RateModel {
    fn validate(&self) -> Result<(), ScheduleError> {
        let finite = self.seconds_per_text_token.is_finite()
            && self.seconds_per_speech_token.is_finite()
            && self.synth_seconds_per_token.is_finite()
            && self.playback_seconds_per_token.is_finite();
        if !finite
            || self.seconds_per_text_token < 0.0
            || self.seconds_per_speech_token < 0.0
            || self.synth_seconds_per_token < 0.0
            || self.playback_seconds_per_token <= 0.0
        {
            return Err(ScheduleError::InvalidRates);
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ComMode {
    Interleaved,
    FullCom,
}

/// Token counts for one chunk of the response.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ChunkPlan {
    pub text_tokens: usize,
    pub speech_tokens_merged: usize,
    pub speech_tokens_expanded: usize,
}

/// A whole generation to simulate. For `FullCom` the chunks describe the
/// synthesis/playback block structure; generation itself is all text, then
/// all speech.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GenerationPlan {
    pub mode: ComMode,
    /// Text-question tokens generated before the answer (0 = skip TQ).
    pub question_text_tokens: usize,
    pub chunks: Vec<ChunkPlan>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EventKind {
    GenText,
    GenSpeech,
    Synth,
    Play,
}

/// One timed event. `chunk` is `None` for the text-question generation.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ScheduleEvent {
    pub kind: EventKind,
    pub chunk: Option<usize>,
    pub start: f64,
    pub end: f64,
    pub tokens: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScheduleTrace {
    pub events: Vec<ScheduleEvent>,
}

impl ScheduleTrace {
    pub fn play_events(&self) -> impl Iterator<Item = &ScheduleEvent> {
        self.events.iter().filter(|e| e.kind == EventKind::Play)
    }
}

/// A silence in mid-response playback.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Stall {
    pub start: f64,
    pub duration: f64,
}

fn validate_plan(plan: &GenerationPlan) -> Result<(), ScheduleError> {
    if plan.chunks.is_empty() {
        return Err(ScheduleError::EmptyPlan);
    }
    for (i, c) in plan.chunks.iter().enumerate() {
        if c.text_tokens == 0 || c.speech_tokens_merged == 0 || c.speech_tokens_expanded == 0 {
            return Err(ScheduleError::EmptyChunk(i));
        }
    }
    Ok(())
}

/// Runs the event simulation for one plan.
pub fn simulate(plan: &GenerationPlan, rates: &RateModel) -> Result<ScheduleTrace, ScheduleError> {
    rates.validate()?;
    validate_plan(plan)?;

    let mut events = Vec::new();
    let mut clock = 0.0f64;

    if plan.question_text_tokens > 0 {
        let end = clock + plan.question_text_tokens as f64 * rates.seconds_per_text_token;
        events.push(ScheduleEvent {
            kind: EventKind::GenText,
            chunk: None,
            start: clock,
            end,
            tokens: plan.question_text_tokens,
        });
        clock = end;
    }

    // Generation end per chunk's speech, in chunk order.
    let mut speech_done = Vec::with_capacity(plan.chunks.len());
    match plan.mode {
        ComMode::Interleaved => {
            for (i, c) in plan.chunks.iter().enumerate() {
                let end = clock + c.text_tokens as f64 * rates.seconds_per_text_token;
                events.push(ScheduleEvent {
                    kind: EventKind::GenText,
                    chunk: Some(i),
                    start: clock,
                    end,
                    tokens: c.text_tokens,
                });
                clock = end;
                let end = clock + c.speech_tokens_merged as f64 * rates.seconds_per_speech_token;
                events.push(ScheduleEvent {
                    kind: EventKind::GenSpeech,
                    chunk: Some(i),
                    start: clock,
                    end,
                    tokens: c.speech_tokens_merged,
                });
                clock = end;
                speech_done.push(clock);
            }
        }
        ComMode::FullCom => {
            for (i, c) in plan.chunks.iter().enumerate() {
                let end = clock + c.text_tokens as f64 * rates.seconds_per_text_token;
                events.push(ScheduleEvent {
                    kind: EventKind::GenText,
                    chunk: Some(i),
                    start: clock,
                    end,
                    tokens: c.text_tokens,
                });
                clock = end;
            }
            for (i, c) in plan.chunks.iter().enumerate() {
                let end = clock + c.speech_tokens_merged as f64 * rates.seconds_per_speech_token;
                events.push(ScheduleEvent {
                    kind: EventKind::GenSpeech,
                    chunk: Some(i),
                    start: clock,
                    end,
                    tokens: c.speech_tokens_merged,
                });
                clock = end;
            }
            // Synthesis begins only once the whole response is generated.
            speech_done = vec![clock; plan.chunks.len()];
        }
    }

    let mut synth_free = 0.0f64;
    let mut play_free = 0.0f64;
    for (i, c) in plan.chunks.iter().enumerate() {
        let synth_start = speech_done[i].max(synth_free);
        let synth_end = synth_start + c.speech_tokens_expanded as f64 * rates.synth_seconds_per_token;
        events.push(ScheduleEvent {
            kind: EventKind::Synth,
            chunk: Some(i),
            start: synth_start,
            end: synth_end,
            tokens: c.speech_tokens_expanded,
        });
        synth_free = synth_end;

        let play_start = synth_end.max(play_free);
        let play_end =
            play_start + c.speech_tokens_expanded as f64 * rates.playback_seconds_per_token;
        events.push(ScheduleEvent {
            kind: EventKind::Play,
            chunk: Some(i),
            start: play_start,
            end: play_end,
            tokens: c.speech_tokens_expanded,
        });
        play_free = play_end;
    }

    Ok(ScheduleTrace { events })
}

/// Start time of the earliest playback event.
pub fn first_audio_latency(trace: &ScheduleTrace) -> Result<f64, ScheduleError> {
    trace
        .play_events()
        .map(|e| e.start)
        .fold(None, |acc: Option<f64>, s| Some(acc.map_or(s, |a| a.min(s))))
        .ok_or(ScheduleError::NoPlayback)
}

/// Gaps between consecutive playback events where audio is silent
/// mid-response.
pub fn stall_report(trace: &ScheduleTrace) -> Vec<Stall> {
    let mut plays: Vec<&ScheduleEvent> = trace.play_events().collect();
    plays.sort_by(|a, b| a.start.total_cmp(&b.start));
    let mut stalls = Vec::new();
    for pair in plays.windows(2) {
        let gap = pair[1].start - pair[0].end;
        if gap > 0.0 {
            stalls.push(Stall {
                start: pair[0].end,
                duration: gap,
            });
        }
    }
    stalls
}

/// Token totals of one utterance, used to derive comparable plans.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct PairTotals {
    pub question_text_tokens: usize,
    pub answer_text_tokens: usize,
    pub speech_tokens_merged: usize,
    pub speech_tokens_expanded: usize,
}

/// Splits totals into chunks of at most `chunk_size` text tokens, with
/// speech tokens apportioned by cumulative text share.
pub fn plan_chunks(totals: &PairTotals, chunk_size: usize) -> Result<Vec<ChunkPlan>, ScheduleError> {
    if totals.answer_text_tokens == 0
        || totals.speech_tokens_merged == 0
        || totals.speech_tokens_expanded == 0
        || chunk_size == 0
    {
        return Err(ScheduleError::InvalidTotals);
    }
    let text = totals.answer_text_tokens;
    let n_chunks = text.div_ceil(chunk_size);
    let fair_share = |total: usize, upto_text: usize| total * upto_text / text;
    let mut chunks = Vec::with_capacity(n_chunks);
    let mut text_done = 0usize;
    for _ in 0..n_chunks {
        let t = chunk_size.min(text - text_done);
        let merged = fair_share(totals.speech_tokens_merged, text_done + t)
            - fair_share(totals.speech_tokens_merged, text_done);
        let expanded = fair_share(totals.speech_tokens_expanded, text_done + t)
            - fair_share(totals.speech_tokens_expanded, text_done);
        chunks.push(ChunkPlan {
            text_tokens: t,
            // A chunk always carries at least one speech token.
            speech_tokens_merged: merged.max(1),
            speech_tokens_expanded: expanded.max(1),
        });
        text_done += t;
    }
    Ok(chunks)
}

/// Side-by-side latency report for the two modes.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModeComparison {
    pub latency_interleaved: f64,
    pub latency_full_com: f64,
    pub speedup: f64,
    pub stalls_interleaved: Vec<Stall>,
    pub stalls_full_com: Vec<Stall>,
}

/// Simulates both modes over the same totals and chunking and reports
/// first-audio latencies and their ratio.
pub fn compare_modes(
    totals: &PairTotals,
    rates: &RateModel,
    chunk_size: usize,
) -> Result<ModeComparison, ScheduleError> {
    let chunks = plan_chunks(totals, chunk_size)?;
    let interleaved = simulate(
        &GenerationPlan {
            mode: ComMode::Interleaved,
            question_text_tokens: totals.question_text_tokens,
            chunks: chunks.clone(),
        },
        rates,
    )?;
    let full = simulate(
        &GenerationPlan {
            mode: ComMode::FullCom,
            question_text_tokens: totals.question_text_tokens,
            chunks,
        },
        rates,
    )?;
    let latency_interleaved = first_audio_latency(&interleaved)?;
    let latency_full_com = first_audio_latency(&full)?;
    let speedup = if latency_full_com == latency_interleaved {
        1.0
    } else {
        latency_full_com / latency_interleaved
    };
    Ok(ModeComparison {
        latency_interleaved,
        latency_full_com,
        speedup,
        stalls_interleaved: stall_report(&interleaved),
        stalls_full_com: stall_report(&full),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn worked_rates() -> RateModel {
        RateModel {
            seconds_per_text_token: 0.01,
            seconds_per_speech_token: 0.01,
            synth_seconds_per_token: 0.002,
            playback_seconds_per_token: 0.04,
        }
    }

    fn chunk(text: usize, speech: usize) -> ChunkPlan {
        ChunkPlan {
            text_tokens: text,
            speech_tokens_merged: speech,
            speech_tokens_expanded: speech,
        }
    }

    #[test]
    fn single_chunk_first_audio() {
        let plan = GenerationPlan {
            mode: ComMode::Interleaved,
            question_text_tokens: 0,
            chunks: vec![chunk(5, 20)],
        };
        let trace = simulate(&plan, &worked_rates()).unwrap();
        let expected = 5.0 * 0.01 + 20.0 * 0.01 + 20.0 * 0.002;
        assert!((first_audio_latency(&trace).unwrap() - expected).abs() < 1e-12);
    }

    #[test]
    fn free_generation_plays_immediately() {
        let rates = RateModel {
            seconds_per_text_token: 0.0,
            seconds_per_speech_token: 0.0,
            synth_seconds_per_token: 0.0,
            playback_seconds_per_token: 0.04,
        };
        let plan = GenerationPlan {
            mode: ComMode::Interleaved,
            question_text_tokens: 3,
            chunks: vec![chunk(5, 20), chunk(5, 20)],
        };
        let trace = simulate(&plan, &rates).unwrap();
        assert_eq!(first_audio_latency(&trace).unwrap(), 0.0);
    }

    #[test]
    fn four_chunks_vs_full_com_worked_example() {
        let totals = PairTotals {
            question_text_tokens: 0,
            answer_text_tokens: 20,
            speech_tokens_merged: 80,
            speech_tokens_expanded: 80,
        };
        let cmp = compare_modes(&totals, &worked_rates(), 5).unwrap();
        let expected_interleaved = 5.0 * 0.01 + 20.0 * 0.01 + 20.0 * 0.002;
        let expected_full = 20.0 * 0.01 + 80.0 * 0.01 + 20.0 * 0.002;
        assert!((cmp.latency_interleaved - expected_interleaved).abs() < 1e-9);
        assert!((cmp.latency_full_com - expected_full).abs() < 1e-9);
        assert!((cmp.speedup - expected_full / expected_interleaved).abs() < 1e-9);
        // The ratio rounds to the x3.59 headline.
        assert!((cmp.speedup - 3.59).abs() < 0.005);
    }

    #[test]
    fn whole_answer_chunk_degenerates_to_full_com() {
        let totals = PairTotals {
            question_text_tokens: 4,
            answer_text_tokens: 20,
            speech_tokens_merged: 60,
            speech_tokens_expanded: 75,
        };
        let cmp = compare_modes(&totals, &worked_rates(), 20).unwrap();
        assert_eq!(cmp.speedup, 1.0);

        let chunks = plan_chunks(&totals, 20).unwrap();
        let a = simulate(
            &GenerationPlan {
                mode: ComMode::Interleaved,
                question_text_tokens: 4,
                chunks: chunks.clone(),
            },
            &worked_rates(),
        )
        .unwrap();
        let b = simulate(
            &GenerationPlan {
                mode: ComMode::FullCom,
                question_text_tokens: 4,
                chunks,
            },
            &worked_rates(),
        )
        .unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn slow_generation_stalls_playback() {
        let rates = RateModel {
            seconds_per_text_token: 0.01,
            seconds_per_speech_token: 0.1, // slower than playback
            synth_seconds_per_token: 0.0,
            playback_seconds_per_token: 0.04,
        };
        let plan = GenerationPlan {
            mode: ComMode::Interleaved,
            question_text_tokens: 0,
            chunks: vec![chunk(2, 10), chunk(2, 10)],
        };
        let trace = simulate(&plan, &rates).unwrap();
        let stalls = stall_report(&trace);
        assert_eq!(stalls.len(), 1);
        assert!(stalls[0].duration > 0.0);
    }

    #[test]
    fn fast_generation_has_no_stalls() {
        let plan = GenerationPlan {
            mode: ComMode::Interleaved,
            question_text_tokens: 0,
            chunks: vec![chunk(2, 50), chunk(2, 50), chunk(2, 50)],
        };
        let trace = simulate(&plan, &worked_rates()).unwrap();
        assert!(stall_report(&trace).is_empty());
    }

    #[test]
    fn single_chunk_cannot_stall() {
        let plan = GenerationPlan {
            mode: ComMode::Interleaved,
            question_text_tokens: 0,
            chunks: vec![chunk(5, 20)],
        };
        let trace = simulate(&plan, &worked_rates()).unwrap();
        assert!(stall_report(&trace).is_empty());
    }

    #[test]
    fn interleaved_dominates_full_com_over_rate_grid() {
        let rate_values = [0.0, 0.01, 0.05];
        let chunkings = [1usize, 3, 5, 7, 20];
        let totals = PairTotals {
            question_text_tokens: 5,
            answer_text_tokens: 20,
            speech_tokens_merged: 64,
            speech_tokens_expanded: 80,
        };
        for &t in &rate_values {
            for &s in &rate_values {
                for &y in &rate_values {
                    for &p in &rate_values {
                        let rates = RateModel {
                            seconds_per_text_token: t,
                            seconds_per_speech_token: s,
                            synth_seconds_per_token: y,
                            playback_seconds_per_token: if p == 0.0 { 0.04 } else { p },
                        };
                        for &cs in &chunkings {
                            let cmp = compare_modes(&totals, &rates, cs).unwrap();
                            assert!(
                                cmp.latency_interleaved <= cmp.latency_full_com,
                                "violation at rates {rates:?} chunk {cs}"
                            );
                        }
                    }
                }
            }
        }
    }

    #[test]
    fn latency_is_monotone_in_first_chunk_size() {
        let rates = worked_rates();
        let mut prev = None;
        for text in 1..10usize {
            let plan = GenerationPlan {
                mode: ComMode::Interleaved,
                question_text_tokens: 0,
                chunks: vec![chunk(text, 20), chunk(5, 20)],
            };
            let latency = first_audio_latency(&simulate(&plan, &rates).unwrap()).unwrap();
            if let Some(p) = prev {
                assert!(latency >= p);
            }
            prev = Some(latency);
        }
        let mut prev = None;
        for speech in 1..10usize {
            let plan = GenerationPlan {
                mode: ComMode::Interleaved,
                question_text_tokens: 0,
                chunks: vec![chunk(5, speech), chunk(5, 20)],
            };
            let latency = first_audio_latency(&simulate(&plan, &rates).unwrap()).unwrap();
            if let Some(p) = prev {
                assert!(latency >= p);
            }
            prev = Some(latency);
        }
    }

    #[test]
    fn halving_chunk_size_never_raises_latency() {
        let totals = PairTotals {
            question_text_tokens: 3,
            answer_text_tokens: 32,
            speech_tokens_merged: 100,
            speech_tokens_expanded: 128,
        };
        let rates = worked_rates();
        let mut cs = 32usize;
        let mut prev = f64::INFINITY;
        while cs >= 1 {
            let cmp = compare_modes(&totals, &rates, cs).unwrap();
            assert!(cmp.latency_interleaved <= prev + 1e-12);
            prev = cmp.latency_interleaved;
            cs /= 2;
        }
    }

    #[test]
    fn trace_conserves_tokens_and_playback_time() {
        let plan = GenerationPlan {
            mode: ComMode::Interleaved,
            question_text_tokens: 7,
            chunks: vec![
                ChunkPlan { text_tokens: 4, speech_tokens_merged: 9, speech_tokens_expanded: 13 },
                ChunkPlan { text_tokens: 6, speech_tokens_merged: 11, speech_tokens_expanded: 17 },
            ],
        };
        let rates = worked_rates();
        let trace = simulate(&plan, &rates).unwrap();

        let gen_text: usize = trace
            .events
            .iter()
            .filter(|e| e.kind == EventKind::GenText)
            .map(|e| e.tokens)
            .sum();
        let gen_speech: usize = trace
            .events
            .iter()
            .filter(|e| e.kind == EventKind::GenSpeech)
            .map(|e| e.tokens)
            .sum();
        assert_eq!(gen_text, 7 + 4 + 6);
        assert_eq!(gen_speech, 9 + 11);

        let playback: f64 = trace.play_events().map(|e| e.end - e.start).sum();
        assert!((playback - 30.0 * rates.playback_seconds_per_token).abs() < 1e-12);
    }

    #[test]
    fn generation_events_are_serial(){
        for mode in [ComMode::Interleaved, ComMode::FullCom] {
            let plan = GenerationPlan {
                mode,
                question_text_tokens: 2,
                chunks: vec![chunk(3, 8), chunk(4, 6)],
            };
            let trace = simulate(&plan, &worked_rates()).unwrap();
            let mut clock = 0.0;
            for e in trace.events.iter().filter(|e| {
                matches!(e.kind, EventKind::GenText | EventKind::GenSpeech)
            }) {
                assert_eq!(e.start, clock);
                assert!(e.end >= e.start);
                clock = e.end;
            }
        }
    }

    #[test]
    fn latency_of_playless_trace_is_an_error() {
        let trace = ScheduleTrace { events: vec![] };
        assert_eq!(first_audio_latency(&trace), Err(ScheduleError::NoPlayback));
    }

    #[test]
    fn empty_plan_is_rejected() {
        let plan = GenerationPlan {
            mode: ComMode::Interleaved,
            question_text_tokens: 0,
            chunks: vec![],
        };
        assert_eq!(simulate(&plan, &worked_rates()), Err(ScheduleError::EmptyPlan));
    }
}
