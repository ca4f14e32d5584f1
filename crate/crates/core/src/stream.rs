//! Timed delivery of source words.
//!
//! [`TextStream`] hands out words instantly and stamps them with their
//! 1-based position. [`AsrSimStream`] replays a [`TimedTranscript`] through
//! fixed read windows: at every multiple of the window length the words whose
//! audio has ended become visible, and the last visible word is held back
//! (it may still be clipped) until the whole recording has been read.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::tokenizer::TokenizedSentence;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Mode {
    /// Delays count source words.
    Text,
    /// Delays count milliseconds of source audio.
    Speech,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct StreamWord {
    pub word: String,
    /// Words delivered so far (text) or the exposure tick in ms (speech).
    pub stamp: u64,
}

pub trait SourceStream: Iterator<Item = StreamWord> + Send {
    fn mode(&self) -> Mode;

    /// Total source length in stream-clock units.
    fn extent(&self) -> u64;
}

pub struct TextStream {
    words: std::vec::IntoIter<String>,
    delivered: u64,
    len: u64,
}

pub fn text_stream(sentence: &TokenizedSentence) -> TextStream {
    TextStream {
        words: sentence.words.clone().into_iter(),
        delivered: 0,
        len: sentence.len() as u64,
    }
}

impl Iterator for TextStream {
    type Item = StreamWord;

    fn next(&mut self) -> Option<StreamWord> {
        let word = self.words.next()?;
        self.delivered += 1;
        Some(StreamWord {
            word,
            stamp: self.delivered,
        })
    }
}

impl SourceStream for TextStream {
    fn mode(&self) -> Mode {
        Mode::Text
    }

    fn extent(&self) -> u64 {
        self.len
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TimedWord {
    pub w: String,
    pub end_ms: u64,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TimedTranscript {
    pub words: Vec<TimedWord>,
    pub total_ms: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub reference: Option<String>,
}

impl TimedTranscript {
    pub fn validate(&self) -> Result<()> {
        for pair in self.words.windows(2) {
            if pair[1].end_ms <= pair[0].end_ms {
                return Err(Error::InvalidArgument(format!(
                    "end_ms must increase strictly: {:?} then {:?}",
                    pair[0].w, pair[1].w
                )));
            }
        }
        if let Some(last) = self.words.last() {
            if self.total_ms < last.end_ms {
                return Err(Error::InvalidArgument(format!(
                    "total_ms {} ends before the last word ({} ms)",
                    self.total_ms, last.end_ms
                )));
            }
        }
        if self
            .words
            .iter()
            .any(|w| w.w.is_empty() || w.w.contains(char::is_whitespace))
        {
            return Err(Error::InvalidArgument(
                "transcript words must be non-empty and whitespace-free".into(),
            ));
        }
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let t: TimedTranscript = serde_json::from_str(&text)?;
        t.validate()?;
        Ok(t)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct AsrSimConfig {
    pub window_ms: u64,
    pub drop_last_word: bool,
}

impl Default for AsrSimConfig {
    fn default() -> Self {
        AsrSimConfig {
            window_ms: 200,
            drop_last_word: true,
        }
    }
}

pub struct AsrSimStream {
    transcript: TimedTranscript,
    cfg: AsrSimConfig,
    tick: u64,
    /// Words exposed so far.
    exposed: usize,
    /// Words already handed to the consumer.
    yielded: usize,
}

pub fn asr_sim_stream(transcript: TimedTranscript, cfg: AsrSimConfig) -> Result<AsrSimStream> {
    if cfg.window_ms == 0 {
        return Err(Error::InvalidArgument("window_ms must be positive".into()));
    }
    transcript.validate()?;
    Ok(AsrSimStream {
        transcript,
        cfg,
        tick: 0,
        exposed: 0,
        yielded: 0,
    })
}

impl AsrSimStream {
    fn advance(&mut self) {
        self.tick += self.cfg.window_ms;
        let words = &self.transcript.words;
        let target = if self.tick >= self.transcript.total_ms {
            words.len()
        } else {
            let visible = words.iter().take_while(|w| w.end_ms <= self.tick).count();
            if self.cfg.drop_last_word {
                visible.saturating_sub(1)
            } else {
                visible
            }
        };
        self.exposed = self.exposed.max(target);
    }
}

impl Iterator for AsrSimStream {
    type Item = StreamWord;

    fn next(&mut self) -> Option<StreamWord> {
        let total = self.transcript.words.len();
        if self.yielded >= total {
            return None;
        }
        while self.exposed <= self.yielded {
            self.advance();
        }
        let word = self.transcript.words[self.yielded].w.clone();
        self.yielded += 1;
        Some(StreamWord {
            word,
            stamp: self.tick,
        })
    }
}

impl SourceStream for AsrSimStream {
    fn mode(&self) -> Mode {
        Mode::Speech
    }

    fn extent(&self) -> u64 {
        self.transcript.total_ms
    }
}
