//! Policy-free streaming inference.
//!
//! The first `k` source words are revealed, then the backend is asked for one
//! unit at a time:
//!
//! * a word is committed and one more source word is revealed (WRITE + READ),
//! * a WAIT reveals one more source word and is never committed (READ),
//! * EOS ends the session.
//!
//! Once the source is exhausted reveals are no-ops and generation continues
//! until EOS. A WAIT at that point is discarded and the backend is asked
//! again with WAIT suppressed; [`SessionConfig::max_suppressed_waits`]
//! consecutive ones abort the session.

mod mock;

use std::fmt;
use std::time::Instant;

use serde::{Deserialize, Serialize};

pub use self::mock::{DictionaryBackend, DictionaryEntry, ScriptedBackend};
use crate::prompt::{PromptTemplate, DEFAULT_WAIT_LITERAL};
use crate::stream::{Mode, SourceStream, StreamWord};
use crate::tokenizer::detokenize;

/// One generation step as seen by the engine.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Unit {
    Word(String),
    Wait,
    Eos,
}

impl Unit {
    /// Parses the script notation: the WAIT and EOS literals map to their
    /// units, anything else is a word.
    pub fn from_literal(s: &str, wait_literal: &str) -> Unit {
        match s {
            _ if s == wait_literal => Unit::Wait,
            "<EOS>" | "</s>" => Unit::Eos,
            _ => Unit::Word(s.to_string()),
        }
    }
}

impl fmt::Display for Unit {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Unit::Word(w) => f.write_str(w),
            Unit::Wait => f.write_str(DEFAULT_WAIT_LITERAL),
            Unit::Eos => f.write_str("<EOS>"),
        }
    }
}

/// Everything a backend may look at when producing the next unit.
#[derive(Debug, Clone, Copy)]
pub struct UnitRequest<'a> {
    pub prompt: &'a str,
    pub partial_source: &'a [String],
    pub partial_target: &'a [String],
    /// All source words are in `partial_source`.
    pub source_complete: bool,
    /// The backend must not answer WAIT.
    pub suppress_wait: bool,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize, thiserror::Error)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum BackendError {
    #[error("backend unavailable after {attempts} attempt(s): {message}")]
    BackendUnavailable { attempts: u32, message: String },
    #[error("malformed backend response: {message}")]
    MalformedResponse { message: String },
    #[error("script exhausted after {consumed} unit(s) without EOS")]
    ScriptUnderrun { consumed: usize },
    #[error("no recorded unit for prompt {prompt_sha256}")]
    ReplayMiss { prompt_sha256: String },
    #[error("backend io error: {message}")]
    Io { message: String },
}

pub trait TranslatorBackend: Send {
    fn next_unit(&mut self, request: &UnitRequest<'_>) -> Result<Unit, BackendError>;
}

impl<B: TranslatorBackend + ?Sized> TranslatorBackend for Box<B> {
    fn next_unit(&mut self, request: &UnitRequest<'_>) -> Result<Unit, BackendError> {
        (**self).next_unit(request)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SessionConfig {
    /// Source words required before the first WRITE.
    pub k: usize,
    pub template: PromptTemplate,
    pub wait_literal: String,
    pub max_suppressed_waits: usize,
    /// Hard cap on committed words.
    pub max_hypothesis_words: usize,
    /// Stamp events with wall-clock milliseconds.
    pub wall_clock: bool,
}

impl SessionConfig {
    pub fn new(k: usize, template: PromptTemplate) -> Self {
        SessionConfig {
            k,
            template,
            wait_literal: DEFAULT_WAIT_LITERAL.to_string(),
            max_suppressed_waits: 3,
            max_hypothesis_words: 1024,
            wall_clock: false,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "lowercase")]
pub enum EventKind {
    Read {
        word: String,
    },
    Write {
        word: String,
        delay: u64,
    },
    Wait {
        /// Last revealed source word when the WAIT was produced.
        after: Option<String>,
        /// Produced after the source was exhausted and discarded.
        #[serde(default, skip_serializing_if = "std::ops::Not::not")]
        suppressed: bool,
    },
    Eos,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Event {
    #[serde(flatten)]
    pub kind: EventKind,
    /// Source words in the prompt when the event happened.
    pub revealed: usize,
    /// Stream clock (words or ms) of the latest revealed word.
    pub clock: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub wall_ms: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(into = "TraceWire", try_from = "TraceWire")]
pub struct SessionTrace {
    pub k: usize,
    pub mode: Mode,
    pub source: Vec<String>,
    pub hypothesis: Vec<String>,
    /// g(t): source words revealed, or ms of audio consumed, at each WRITE.
    pub delays: Vec<u64>,
    /// Source length in delay units (words, or total audio ms).
    pub source_extent: u64,
    pub events: Vec<Event>,
    /// Wall-clock processing time, when measured.
    pub wall_ms: Option<f64>,
}

#[derive(Serialize, Deserialize)]
struct TraceWire {
    k: usize,
    mode: Mode,
    source: Vec<String>,
    hypothesis: Vec<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    delays_words: Option<Vec<u64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    delays_ms: Option<Vec<u64>>,
    source_extent: u64,
    events: Vec<Event>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    wall_ms: Option<f64>,
}

impl From<SessionTrace> for TraceWire {
    fn from(t: SessionTrace) -> Self {
        let (delays_words, delays_ms) = match t.mode {
            Mode::Text => (Some(t.delays), None),
            Mode::Speech => (None, Some(t.delays)),
        };
        TraceWire {
            k: t.k,
            mode: t.mode,
            source: t.source,
            hypothesis: t.hypothesis,
            delays_words,
            delays_ms,
            source_extent: t.source_extent,
            events: t.events,
            wall_ms: t.wall_ms,
        }
    }
}

impl TryFrom<TraceWire> for SessionTrace {
    type Error = String;

    fn try_from(w: TraceWire) -> Result<Self, String> {
        let delays = match (w.mode, w.delays_words, w.delays_ms) {
            (Mode::Text, Some(d), None) | (Mode::Speech, None, Some(d)) => d,
            (mode, _, _) => {
                return Err(format!(
                    "a {mode:?} trace needs exactly one of delays_words/delays_ms matching its mode"
                ))
            }
        };
        if delays.len() != w.hypothesis.len() {
            return Err(format!(
                "{} delays for {} hypothesis words",
                delays.len(),
                w.hypothesis.len()
            ));
        }
        Ok(SessionTrace {
            k: w.k,
            mode: w.mode,
            source: w.source,
            hypothesis: w.hypothesis,
            delays,
            source_extent: w.source_extent,
            events: w.events,
            wall_ms: w.wall_ms,
        })
    }
}

/// One backend call, reconstructed from the events.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Step {
    pub partial_source: String,
    pub partial_target: String,
    pub prediction: String,
}

impl SessionTrace {
    pub fn hypothesis_text(&self) -> String {
        self.hypothesis.join(" ")
    }

    /// The prompt slots and prediction of every backend call, in order.
    pub fn steps(&self) -> Vec<Step> {
        let mut source: Vec<String> = Vec::new();
        let mut target: Vec<String> = Vec::new();
        let mut steps = Vec::new();
        for e in &self.events {
            let prediction = match &e.kind {
                EventKind::Read { word } => {
                    source.push(word.clone());
                    continue;
                }
                EventKind::Write { word, .. } => word.clone(),
                EventKind::Wait { .. } => DEFAULT_WAIT_LITERAL.to_string(),
                EventKind::Eos => "<EOS>".to_string(),
            };
            // a WRITE or WAIT is followed by its READ, so the prompt slots are
            // the state before this event
            steps.push(Step {
                partial_source: detokenize(&source),
                partial_target: target.join(" "),
                prediction,
            });
            if let EventKind::Write { word, .. } = &e.kind {
                target.push(word.clone());
            }
        }
        steps
    }

    pub fn wait_count(&self) -> usize {
        self.events
            .iter()
            .filter(|e| matches!(e.kind, EventKind::Wait { .. }))
            .count()
    }
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum SessionErrorKind {
    #[error(transparent)]
    Backend(#[from] BackendError),
    #[error("{0} consecutive WAITs after the source was exhausted")]
    WaitOverflow(usize),
    #[error("hypothesis exceeded {0} words without EOS")]
    HypothesisOverflow(usize),
    #[error("backend returned an invalid word {0:?}")]
    InvalidWord(String),
    #[error("k must be at least 1")]
    InvalidK,
}

/// A failed session together with everything recorded before the failure.
#[derive(Debug, Clone, PartialEq, thiserror::Error)]
#[error("session failed: {kind}")]
pub struct SessionError {
    pub kind: SessionErrorKind,
    pub partial: SessionTrace,
}

/// Mutable state of one session.
#[derive(Debug, Clone)]
pub struct SessionState {
    pub k: usize,
    /// Source words pulled from the stream.
    pub buffer: Vec<StreamWord>,
    /// How many buffered words are in the prompt.
    pub revealed: usize,
    pub committed: Vec<String>,
    pub delays: Vec<u64>,
    pub events: Vec<Event>,
    pub finished: bool,
}

impl SessionState {
    pub fn new(k: usize) -> Self {
        SessionState {
            k,
            buffer: Vec::new(),
            revealed: 0,
            committed: Vec::new(),
            delays: Vec::new(),
            events: Vec::new(),
            finished: false,
        }
    }

    pub fn revealed_words(&self) -> Vec<String> {
        self.buffer[..self.revealed]
            .iter()
            .map(|w| w.word.clone())
            .collect()
    }

    fn clock(&self) -> u64 {
        self.revealed
            .checked_sub(1)
            .map_or(0, |i| self.buffer[i].stamp)
    }
}

pub fn build_prompt(state: &SessionState, template: &PromptTemplate) -> String {
    template.render(
        &detokenize(&state.revealed_words()),
        &state.committed.join(" "),
    )
}

struct Session<'a, S: SourceStream + ?Sized> {
    stream: &'a mut S,
    state: SessionState,
    exhausted: bool,
    extent: u64,
    started: Option<Instant>,
}

impl<S: SourceStream + ?Sized> Session<'_, S> {
    fn wall(&self) -> Option<f64> {
        self.started.map(|t| t.elapsed().as_secs_f64() * 1000.0)
    }

    fn push(&mut self, kind: EventKind) {
        let event = Event {
            kind,
            revealed: self.state.revealed,
            clock: self.state.clock(),
            wall_ms: self.wall(),
        };
        self.state.events.push(event);
    }

    fn pull(&mut self) {
        if self.exhausted {
            return;
        }
        match self.stream.next() {
            Some(w) => self.state.buffer.push(w),
            None => self.exhausted = true,
        }
    }

    /// Reveals one more source word; a no-op once the source is exhausted.
    fn read(&mut self) {
        if self.state.revealed == self.state.buffer.len() {
            self.pull();
        }
        if self.state.revealed < self.state.buffer.len() {
            self.state.revealed += 1;
            let word = self.state.buffer[self.state.revealed - 1].word.clone();
            self.push(EventKind::Read { word });
        }
    }

    fn source_complete(&mut self) -> bool {
        if self.state.revealed == self.state.buffer.len() {
            self.pull();
        }
        self.exhausted && self.state.revealed == self.state.buffer.len()
    }

    fn delay(&self) -> u64 {
        match self.stream.mode() {
            Mode::Text => self.state.revealed as u64,
            // the final window may overshoot the end of the audio
            Mode::Speech => self.state.clock().min(self.extent),
        }
    }

    fn trace(&self) -> SessionTrace {
        SessionTrace {
            k: self.state.k,
            mode: self.stream.mode(),
            source: self.state.revealed_words(),
            hypothesis: self.state.committed.clone(),
            delays: self.state.delays.clone(),
            source_extent: self.extent,
            events: self.state.events.clone(),
            wall_ms: self.wall(),
        }
    }

    fn fail(&self, kind: SessionErrorKind) -> SessionError {
        SessionError {
            kind,
            partial: self.trace(),
        }
    }
}

// The error carries the partial trace by value.
#[allow(clippy::result_large_err)]
pub fn run_session<S, B>(
    stream: &mut S,
    backend: &mut B,
    cfg: &SessionConfig,
) -> Result<SessionTrace, SessionError>
where
    S: SourceStream + ?Sized,
    B: TranslatorBackend + ?Sized,
{
    let extent = stream.extent();
    let mut s = Session {
        stream,
        state: SessionState::new(cfg.k),
        exhausted: false,
        extent,
        started: cfg.wall_clock.then(Instant::now),
    };
    if cfg.k == 0 {
        return Err(s.fail(SessionErrorKind::InvalidK));
    }

    for _ in 0..cfg.k {
        s.read();
    }

    // Consecutive WAITs before exhaustion each reveal a word, so a WAIT run
    // is bounded by the remaining source plus `max_suppressed_waits`.
    let mut suppressed_run = 0;
    loop {
        let complete = s.source_complete();
        let prompt = build_prompt(&s.state, &cfg.template);
        let revealed_words = s.state.revealed_words();
        let request = UnitRequest {
            prompt: &prompt,
            partial_source: &revealed_words,
            partial_target: &s.state.committed,
            source_complete: complete,
            suppress_wait: complete && suppressed_run > 0,
        };
        let unit = match backend.next_unit(&request) {
            Ok(u) => u,
            Err(e) => return Err(s.fail(e.into())),
        };

        match unit {
            Unit::Eos => {
                s.push(EventKind::Eos);
                s.state.finished = true;
                break;
            }
            Unit::Wait if complete => {
                let after = revealed_words.last().cloned();
                s.push(EventKind::Wait {
                    after,
                    suppressed: true,
                });
                suppressed_run += 1;
                if suppressed_run >= cfg.max_suppressed_waits {
                    return Err(s.fail(SessionErrorKind::WaitOverflow(suppressed_run)));
                }
            }
            Unit::Wait => {
                let after = revealed_words.last().cloned();
                s.push(EventKind::Wait {
                    after,
                    suppressed: false,
                });
                s.read();
            }
            Unit::Word(word) => {
                if word.is_empty()
                    || word.contains(char::is_whitespace)
                    || word.contains(cfg.wait_literal.as_str())
                {
                    return Err(s.fail(SessionErrorKind::InvalidWord(word)));
                }
                // the gate holds by construction; reveals never undercut k
                debug_assert!(s.state.revealed >= cfg.k || complete);
                suppressed_run = 0;
                let delay = s.delay();
                s.state.committed.push(word.clone());
                s.state.delays.push(delay);
                s.push(EventKind::Write { word, delay });
                if s.state.committed.len() > cfg.max_hypothesis_words {
                    return Err(s.fail(SessionErrorKind::HypothesisOverflow(
                        cfg.max_hypothesis_words,
                    )));
                }
                s.read();
            }
        }
    }

    Ok(s.trace())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::stream::text_stream;
    use crate::tokenizer::{tokenize, TokenizedSentence};

    fn cfg(k: usize) -> SessionConfig {
        SessionConfig::new(k, PromptTemplate::without_system_message())
    }

    fn script(units: &[&str]) -> ScriptedBackend {
        ScriptedBackend::from_literals(units.iter().copied(), DEFAULT_WAIT_LITERAL)
    }

    #[test]
    fn tea_sentence_progression() {
        let src = tokenize("I like to have tea in the morning.").unwrap();
        let mut backend = script(&[
            "<WAIT>", "Ya", "lyublyu", "<WAIT>", "pit'", "chai", "<WAIT>", "po", "utram.", "<EOS>",
        ]);
        let trace = run_session(&mut text_stream(&src), &mut backend, &cfg(1)).unwrap();
        assert_eq!(trace.hypothesis_text(), "Ya lyublyu pit' chai po utram.");
        assert_eq!(trace.delays, [2, 3, 5, 6, 8, 9]);
        let steps = trace.steps();
        let rows: Vec<(&str, &str, &str)> = steps
            .iter()
            .map(|s| {
                (
                    s.partial_source.as_str(),
                    s.partial_target.as_str(),
                    s.prediction.as_str(),
                )
            })
            .collect();
        assert_eq!(
            rows,
            [
                ("I", "", "<WAIT>"),
                ("I like", "", "Ya"),
                ("I like to", "Ya", "lyublyu"),
                ("I like to have", "Ya lyublyu", "<WAIT>"),
                ("I like to have tea", "Ya lyublyu", "pit'"),
                ("I like to have tea in", "Ya lyublyu pit'", "chai"),
                (
                    "I like to have tea in the",
                    "Ya lyublyu pit' chai",
                    "<WAIT>"
                ),
                (
                    "I like to have tea in the morning",
                    "Ya lyublyu pit' chai",
                    "po"
                ),
                (
                    "I like to have tea in the morning.",
                    "Ya lyublyu pit' chai po",
                    "utram."
                ),
                (
                    "I like to have tea in the morning.",
                    "Ya lyublyu pit' chai po utram.",
                    "<EOS>"
                ),
            ]
        );
    }

    #[test]
    fn never_waiting_backend_follows_wait_k() {
        let src = TokenizedSentence::from_words(&["a", "b", "c", "d", "e"]);
        let mut backend = DictionaryBackend::identity();
        let trace = run_session(&mut text_stream(&src), &mut backend, &cfg(3)).unwrap();
        assert_eq!(trace.delays, [3, 4, 5, 5, 5]);
        let first_write = trace
            .events
            .iter()
            .find(|e| matches!(e.kind, EventKind::Write { .. }))
            .unwrap();
        assert_eq!(first_write.revealed, 3);
    }

    #[test]
    fn immediate_eos() {
        let src = TokenizedSentence::from_words(&["a", "b"]);
        let trace = run_session(&mut text_stream(&src), &mut script(&["<EOS>"]), &cfg(1)).unwrap();
        assert!(trace.hypothesis.is_empty());
        let kinds: Vec<_> = trace.events.iter().map(|e| &e.kind).collect();
        assert_eq!(
            kinds,
            [&EventKind::Read { word: "a".into() }, &EventKind::Eos]
        );
    }

    #[test]
    fn prompt_building() {
        let mut state = SessionState::new(1);
        let push = |state: &mut SessionState, w: &str| {
            state.buffer.push(StreamWord {
                word: w.into(),
                stamp: state.buffer.len() as u64 + 1,
            });
            state.revealed += 1;
        };
        let t = PromptTemplate::interpreter("Russian", DEFAULT_WAIT_LITERAL);
        push(&mut state, "I");
        assert!(build_prompt(&state, &t).ends_with("Translate this text: I [/INST] "));
        push(&mut state, "like");
        push(&mut state, "to");
        state.committed.push("Ya".into());
        assert!(build_prompt(&state, &t).ends_with("Translate this text: I like to [/INST] Ya"));
        let bare = build_prompt(&state, &PromptTemplate::without_system_message());
        assert!(!bare.contains("<<SYS>>"));
    }

    #[test]
    fn exhausted_waits_are_suppressed_then_overflow() {
        let src = TokenizedSentence::from_words(&["a"]);
        let mut backend = script(&["x", "<WAIT>", "y", "<EOS>"]);
        let trace = run_session(&mut text_stream(&src), &mut backend, &cfg(1)).unwrap();
        assert_eq!(trace.hypothesis, ["x", "y"]);
        assert_eq!(trace.delays, [1, 1]);

        let mut stubborn = script(&["x", "<WAIT>", "<WAIT>", "<WAIT>", "<EOS>"]);
        let err = run_session(&mut text_stream(&src), &mut stubborn, &cfg(1)).unwrap_err();
        assert_eq!(err.kind, SessionErrorKind::WaitOverflow(3));
        assert_eq!(err.partial.hypothesis, ["x"]);
    }

    #[test]
    fn backend_failure_keeps_partial_trace() {
        let src = TokenizedSentence::from_words(&["a", "b", "c"]);
        let err = run_session(&mut text_stream(&src), &mut script(&["x"]), &cfg(1)).unwrap_err();
        assert!(matches!(
            err.kind,
            SessionErrorKind::Backend(BackendError::ScriptUnderrun { consumed: 1 })
        ));
        assert_eq!(err.partial.hypothesis, ["x"]);
    }

    #[test]
    fn zero_k_is_rejected() {
        let src = TokenizedSentence::from_words(&["a"]);
        let err =
            run_session(&mut text_stream(&src), &mut script(&["<EOS>"]), &cfg(0)).unwrap_err();
        assert_eq!(err.kind, SessionErrorKind::InvalidK);
    }

    #[test]
    fn words_with_spaces_are_rejected() {
        let src = TokenizedSentence::from_words(&["a"]);
        let mut b = ScriptedBackend::new([Unit::Word("a b".into()), Unit::Eos]);
        let err = run_session(&mut text_stream(&src), &mut b, &cfg(1)).unwrap_err();
        assert!(matches!(err.kind, SessionErrorKind::InvalidWord(_)));
    }

    #[test]
    fn trace_json_round_trip() {
        let src = tokenize("I like tea.").unwrap();
        let mut backend = DictionaryBackend::identity();
        let trace = run_session(&mut text_stream(&src), &mut backend, &cfg(2)).unwrap();
        let json = serde_json::to_string(&trace).unwrap();
        assert!(json.contains("\"delays_words\""));
        assert!(!json.contains("delays_ms"));
        let back: SessionTrace = serde_json::from_str(&json).unwrap();
        assert_eq!(back, trace);
    }
}
