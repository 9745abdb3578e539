//! Rendering and parsing of speech-text interleaved training examples.
//!
//! A response alternates text chunks with their speech-token spans, each span
//! wrapped in `<sosp>`/`<eosp>` markers with token ids rendered as `<NNNN>`:
//!
//! ```text
//! [question]: <TQ>; [answer]: chunk one,<sosp><12><7>...<eosp>chunk two.<sosp>...<eosp>
//! ```
//!
//! The full chain-of-modality baseline renders the complete text answer
//! followed by a single speech block. Speech tokens are rendered in merged
//! (run-length collapsed) form, as the language model consumes them; the
//! per-span repeat counts ride alongside in the example rather than in the
//! markup, so expansion remains lossless.

use std::collections::BTreeMap;

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::chunk::{reconstruct_text, TextChunk};
use crate::codec::SpeechTokenSequence;

/// Start-of-speech marker.
pub const SOSP: &str = "<sosp>";
/// End-of-speech marker.
pub const EOSP: &str = "<eosp>";

#[derive(Debug, Error, PartialEq)]
pub enum MarkupError {
    #[error("unbalanced markup: {SOSP} at byte {position} is never closed")]
    UnclosedSpeech { position: usize },
    #[error("unbalanced markup: {EOSP} at byte {position} has no opening {SOSP}")]
    UnexpectedClose { position: usize },
    #[error("nested {SOSP} at byte {position}")]
    NestedSpeech { position: usize },
    #[error("invalid speech token {content:?} at byte {position}")]
    InvalidToken { position: usize, content: String },
    #[error("markup does not alternate text and speech segments")]
    BrokenAlternation,
    #[error("speech block at byte {position} is empty")]
    EmptySpeech { position: usize },
    #[error("chunk {0} has no assigned speech span")]
    UnassignedSpan(usize),
    #[error("conversation pair invalid: {0}")]
    InvalidPair(String),
    #[error("no instruction templates for task {task} and language {language:?}")]
    MissingTemplates { task: Task, language: String },
}

/// A speech-text conversation pair with the answer already chunked and each
/// chunk's speech span assigned.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConversationPair {
    pub question_text: String,
    pub question_tokens: SpeechTokenSequence,
    pub answer_text: String,
    pub answer_tokens: SpeechTokenSequence,
    pub answer_chunks: Vec<TextChunk>,
}

/// One rendered training example.
///
/// `question_run_counts` and `span_run_counts` carry the repeat count of each
/// merged token rendered in the prompt and in each response span, in order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InterleavedExample {
    pub prompt: String,
    pub response: String,
    pub question_run_counts: Vec<u32>,
    pub span_run_counts: Vec<Vec<u32>>,
}

/// A parsed markup segment: plain text or a list of speech token ids.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum MarkupSegment {
    Text(String),
    Speech(Vec<u32>),
}

fn merge_slice(tokens: &[u32]) -> (Vec<u32>, Vec<u32>) {
    let mut ids = Vec::new();
    let mut counts = Vec::new();
    for &t in tokens {
        if ids.last() == Some(&t) {
            *counts.last_mut().unwrap() += 1;
        } else {
            ids.push(t);
            counts.push(1);
        }
    }
    (ids, counts)
}

fn speech_block(tokens: &[u32]) -> (String, Vec<u32>) {
    let (ids, counts) = merge_slice(tokens);
    let mut block = String::with_capacity(SOSP.len() + EOSP.len() + ids.len() * 6);
    block.push_str(SOSP);
    for id in &ids {
        block.push('<');
        block.push_str(&id.to_string());
        block.push('>');
    }
    block.push_str(EOSP);
    (block, counts)
}

fn validate_pair(pair: &ConversationPair, need_chunks: bool) -> Result<(), MarkupError> {
    if pair.question_text.trim().is_empty() || pair.answer_text.trim().is_empty() {
        return Err(MarkupError::InvalidPair("texts must be non-empty".into()));
    }
    if pair.question_tokens.is_empty() {
        return Err(MarkupError::InvalidPair("question has no speech tokens".into()));
    }
    if pair.answer_tokens.is_empty() {
        return Err(MarkupError::InvalidPair("answer has no speech tokens".into()));
    }
    if !need_chunks {
        return Ok(());
    }
    if pair.answer_chunks.is_empty() {
        return Err(MarkupError::InvalidPair("answer has no chunks".into()));
    }
    if reconstruct_text(&pair.answer_chunks) != pair.answer_text {
        return Err(MarkupError::InvalidPair(
            "chunk texts do not reconstruct the answer text".into(),
        ));
    }
    let mut expected_start = 0usize;
    for (i, chunk) in pair.answer_chunks.iter().enumerate() {
        let (start, end) = chunk.token_span.ok_or(MarkupError::UnassignedSpan(i))?;
        if start != expected_start || end < start {
            return Err(MarkupError::InvalidPair(format!(
                "chunk {i} span ({start}, {end}) breaks the token partition"
            )));
        }
        expected_start = end + 1;
    }
    if expected_start != pair.answer_tokens.len() {
        return Err(MarkupError::InvalidPair(format!(
            "chunk spans cover {expected_start} of {} answer tokens",
            pair.answer_tokens.len()
        )));
    }
    Ok(())
}

fn render_prompt(pair: &ConversationPair, instruction: &str) -> (String, Vec<u32>) {
    let (block, counts) = speech_block(&pair.question_tokens.tokens);
    (format!("{instruction} This is input: {block}."), counts)
}

/// Renders the chunk-level interleaved form: each text chunk immediately
/// followed by its speech span.
pub fn render_interleaved(
    pair: &ConversationPair,
    include_text_question: bool,
    instruction: &str,
) -> Result<InterleavedExample, MarkupError> {
    validate_pair(pair, true)?;
    let (prompt, question_run_counts) = render_prompt(pair, instruction);

    let mut response = String::new();
    if include_text_question {
        response.push_str("[question]: ");
        response.push_str(&pair.question_text);
        response.push_str("; ");
    }
    response.push_str("[answer]: ");
    let mut span_run_counts = Vec::with_capacity(pair.answer_chunks.len());
    for chunk in &pair.answer_chunks {
        let (start, end) = chunk.token_span.expect("validated above");
        response.push_str(&chunk.text);
        let (block, counts) = speech_block(&pair.answer_tokens.tokens[start..=end]);
        response.push_str(&block);
        span_run_counts.push(counts);
    }

    Ok(InterleavedExample {
        prompt,
        response,
        question_run_counts,
        span_run_counts,
    })
}

/// Renders the full chain-of-modality baseline: the complete text answer
/// followed by one speech block holding every answer token.
pub fn render_full_com(
    pair: &ConversationPair,
    include_text_question: bool,
    instruction: &str,
) -> Result<InterleavedExample, MarkupError> {
    validate_pair(pair, false)?;
    let (prompt, question_run_counts) = render_prompt(pair, instruction);

    let mut response = String::new();
    if include_text_question {
        response.push_str("[question]: ");
        response.push_str(&pair.question_text);
        response.push_str("; ");
    }
    response.push_str("[answer]: ");
    response.push_str(&pair.answer_text);
    let (block, counts) = speech_block(&pair.answer_tokens.tokens);
    response.push_str(&block);

    Ok(InterleavedExample {
        prompt,
        response,
        question_run_counts,
        span_run_counts: vec![counts],
    })
}

fn parse_token_body(body: &str, body_offset: usize) -> Result<Vec<u32>, MarkupError> {
    let mut tokens = Vec::new();
    let bytes = body.as_bytes();
    let mut i = 0usize;
    while i < bytes.len() {
        // Whitespace between token markers is tolerated when parsing.
        if bytes[i].is_ascii_whitespace() {
            i += 1;
            continue;
        }
        if bytes[i] != b'<' {
            return Err(MarkupError::InvalidToken {
                position: body_offset + i,
                content: body[i..].chars().take(12).collect(),
            });
        }
        let close = body[i..].find('>').map(|r| i + r).ok_or_else(|| {
            MarkupError::InvalidToken {
                position: body_offset + i,
                content: body[i..].chars().take(12).collect(),
            }
        })?;
        let inner = &body[i + 1..close];
        if inner.is_empty() || !inner.bytes().all(|b| b.is_ascii_digit()) {
            return Err(MarkupError::InvalidToken {
                position: body_offset + i,
                content: inner.to_string(),
            });
        }
        let value: u32 = inner.parse().map_err(|_| MarkupError::InvalidToken {
            position: body_offset + i,
            content: inner.to_string(),
        })?;
        tokens.push(value);
        i = close + 1;
    }
    Ok(tokens)
}

/// Parses a rendered string back into ordered text and speech segments.
///
/// Fails on unbalanced or nested markers (reporting the byte position) and
/// on non-token content inside a speech block.
pub fn parse_markup(s: &str) -> Result<Vec<MarkupSegment>, MarkupError> {
    let mut segments = Vec::new();
    let mut pos = 0usize;
    while pos < s.len() {
        let rest = &s[pos..];
        match rest.find(SOSP) {
            Some(rel) => {
                let text = &rest[..rel];
                if let Some(bad) = text.find(EOSP) {
                    return Err(MarkupError::UnexpectedClose { position: pos + bad });
                }
                if !text.is_empty() {
                    segments.push(MarkupSegment::Text(text.to_string()));
                }
                let body_start = pos + rel + SOSP.len();
                let body_rel = s[body_start..]
                    .find(EOSP)
                    .ok_or(MarkupError::UnclosedSpeech { position: pos + rel })?;
                let body = &s[body_start..body_start + body_rel];
                if let Some(bad) = body.find(SOSP) {
                    return Err(MarkupError::NestedSpeech { position: body_start + bad });
                }
                segments.push(MarkupSegment::Speech(parse_token_body(body, body_start)?));
                pos = body_start + body_rel + EOSP.len();
            }
            None => {
                if let Some(bad) = rest.find(EOSP) {
                    return Err(MarkupError::UnexpectedClose { position: pos + bad });
                }
                segments.push(MarkupSegment::Text(rest.to_string()));
                pos = s.len();
            }
        }
    }
    Ok(segments)
}

/// Parses a rendered response and additionally enforces the rendered-form
/// invariants: segments strictly alternate starting with text, and every
/// speech block is non-empty.
pub fn validate_response_markup(s: &str) -> Result<Vec<MarkupSegment>, MarkupError> {
    let segments = parse_markup(s)?;
    for (i, segment) in segments.iter().enumerate() {
        match segment {
            MarkupSegment::Text(_) if i % 2 == 0 => {}
            MarkupSegment::Speech(tokens) if i % 2 == 1 => {
                if tokens.is_empty() {
                    return Err(MarkupError::EmptySpeech { position: 0 });
                }
            }
            _ => return Err(MarkupError::BrokenAlternation),
        }
    }
    Ok(segments)
}

/// Cross-modal task whose prompts are drawn from the template bank.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Task {
    Asr,
    Tts,
    Mt,
    S2s,
}

impl std::fmt::Display for Task {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Task::Asr => write!(f, "asr"),
            Task::Tts => write!(f, "tts"),
            Task::Mt => write!(f, "mt"),
            Task::S2s => write!(f, "s2s"),
        }
    }
}

/// Ten instruction templates per task and language (pair), sampled uniformly
/// by seed when building prompts.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InstructionTemplateBank {
    templates: BTreeMap<(Task, String), Vec<String>>,
}

impl InstructionTemplateBank {
    pub fn empty() -> Self {
        InstructionTemplateBank {
            templates: BTreeMap::new(),
        }
    }

    pub fn insert(&mut self, task: Task, language: &str, templates: Vec<String>) {
        self.templates.insert((task, language.to_string()), templates);
    }

    pub fn get(&self, task: Task, language: &str) -> Option<&[String]> {
        self.templates
            .get(&(task, language.to_string()))
            .map(|v| v.as_slice())
    }

    /// Deterministically samples one template, uniform over the bank entry.
    pub fn sample_instruction(
        &self,
        task: Task,
        language: &str,
        seed: u64,
    ) -> Result<&str, MarkupError> {
        let templates =
            self.get(task, language)
                .filter(|t| !t.is_empty())
                .ok_or(MarkupError::MissingTemplates {
                    task,
                    language: language.to_string(),
                })?;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let index = rng.random_range(0..templates.len());
        Ok(&templates[index])
    }
}

macro_rules! bank_entry {
    ($bank:expr, $task:expr, $lang:expr, [$($s:expr),+ $(,)?]) => {
        $bank.insert($task, $lang, vec![$($s.to_string()),+]);
    };
}

impl Default for InstructionTemplateBank {
    fn default() -> Self {
        let mut bank = InstructionTemplateBank::empty();
        bank_entry!(bank, Task::Asr, "en", [
            "Convert the following audio into written English text.",
            "Decode the English phrases from the attached audio.",
            "Transcribe this English speech recording into text.",
            "Write down exactly what is said in the following audio.",
            "Turn the attached English audio into a text transcript.",
            "Listen to the recording and type out the English sentences.",
            "Produce a written transcript of the following English speech.",
            "Recognize the speech in this audio and return the English text.",
            "Put the spoken English from the audio into writing.",
            "Generate the English transcription for the audio below.",
        ]);
        bank_entry!(bank, Task::Asr, "zh", [
            "请将下面的音频转写为中文文本。",
            "把这段语音的内容用中文写出来。",
            "请听录音并输出对应的中文文字。",
            "将附带的音频识别为中文文本。",
            "请把以下语音转换成书面中文。",
            "听写下面这段中文语音。",
            "请输出这段录音的中文转写结果。",
            "把下面的语音内容整理成中文文字。",
            "请将这段音频中的话转成中文文本。",
            "识别以下音频并给出中文文字。",
        ]);
        bank_entry!(bank, Task::Tts, "en", [
            "Convert this English text into speech.",
            "Produce English audio from the given text.",
            "Read the following English sentences aloud.",
            "Synthesize a spoken English version of the text below.",
            "Turn the written English below into an audio recording.",
            "Speak the following English passage.",
            "Generate English speech for the provided text.",
            "Voice the English text that follows.",
            "Render the text below as natural English speech.",
            "Create an English audio reading of this text.",
        ]);
        bank_entry!(bank, Task::Tts, "zh", [
            "请将下面的中文文本转换成语音。",
            "把以下文字合成为中文语音。",
            "请朗读下面的中文句子。",
            "将这段中文内容生成音频。",
            "请为下面的文本生成中文语音。",
            "把下面的中文读出来。",
            "请把这段文字变成自然的中文语音。",
            "为以下中文内容合成音频。",
            "请将这些句子用中文语音播报。",
            "生成下面中文文本的语音版本。",
        ]);
        bank_entry!(bank, Task::Mt, "en-zh", [
            "Convert the English text below into Chinese.",
            "Change the English content below into Chinese.",
            "Translate the following English sentences into Chinese.",
            "Render this English passage in Chinese.",
            "Rewrite the English text below in Chinese.",
            "Provide a Chinese translation of the following English text.",
            "Turn the English content that follows into Chinese.",
            "Express the English sentences below in Chinese.",
            "Give the Chinese version of the following English text.",
            "Translate the English below to Chinese.",
        ]);
        bank_entry!(bank, Task::Mt, "zh-en", [
            "Convert the Chinese text below into English.",
            "Change the Chinese content below into English.",
            "Translate the following Chinese sentences into English.",
            "Render this Chinese passage in English.",
            "Rewrite the Chinese text below in English.",
            "Provide an English translation of the following Chinese text.",
            "Turn the Chinese content that follows into English.",
            "Express the Chinese sentences below in English.",
            "Give the English version of the following Chinese text.",
            "Translate the Chinese below to English.",
        ]);
        bank_entry!(bank, Task::S2s, "en", [
            "Please directly answer the questions in the user's speech.",
            "Listen to the user's speech and respond to it.",
            "Answer the spoken question below.",
            "Reply to the question asked in the following audio.",
            "Respond helpfully to the user's spoken request.",
            "Address the question contained in this speech input.",
            "Give a direct answer to the spoken question.",
            "Respond to what the user says in the audio.",
            "Answer the user's voice question below.",
            "Provide a response to the following spoken input.",
        ]);
        bank_entry!(bank, Task::S2s, "zh", [
            "请直接回答用户语音中的问题。",
            "听取用户的语音并作出回应。",
            "请回答下面这段语音中的问题。",
            "针对以下语音提问给出回答。",
            "请对用户的语音请求作出有帮助的回应。",
            "回应这段语音输入中的问题。",
            "请直接回复语音中提出的问题。",
            "回答用户在音频中说的内容。",
            "请回答下面的语音提问。",
            "对以下语音输入给出回应。",
        ]);
        bank
    }
}
