//! Deterministic backends for tests and offline runs.

use std::collections::{HashMap, VecDeque};
use std::path::Path;

use super::{BackendError, TranslatorBackend, Unit, UnitRequest};
use crate::error::{Error, Result};

/// Replays a fixed unit sequence regardless of the prompt.
#[derive(Debug, Clone)]
pub struct ScriptedBackend {
    units: VecDeque<Unit>,
    consumed: usize,
}

impl ScriptedBackend {
    pub fn new(units: impl IntoIterator<Item = Unit>) -> Self {
        ScriptedBackend {
            units: units.into_iter().collect(),
            consumed: 0,
        }
    }

    pub fn from_literals<'a>(units: impl IntoIterator<Item = &'a str>, wait_literal: &str) -> Self {
        Self::new(
            units
                .into_iter()
                .map(|u| Unit::from_literal(u, wait_literal)),
        )
    }

    pub fn remaining(&self) -> usize {
        self.units.len()
    }
}

impl TranslatorBackend for ScriptedBackend {
    fn next_unit(&mut self, _: &UnitRequest<'_>) -> Result<Unit, BackendError> {
        let unit = self.units.pop_front().ok_or(BackendError::ScriptUnderrun {
            consumed: self.consumed,
        })?;
        self.consumed += 1;
        Ok(unit)
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DictionaryEntry {
    pub target: String,
    /// Extra source words that must be visible before this one is translated.
    pub lookahead: usize,
}

/// Word-for-word translation in source order.
///
/// Target word `t` translates source word `t`. It is written once source
/// words `0..=t + lookahead` are visible (or the source is complete);
/// otherwise the backend answers WAIT. Unknown words are copied through.
#[derive(Debug, Clone, Default)]
pub struct DictionaryBackend {
    entries: HashMap<String, DictionaryEntry>,
    default_lookahead: usize,
}

impl DictionaryBackend {
    pub fn new(entries: HashMap<String, DictionaryEntry>, default_lookahead: usize) -> Self {
        DictionaryBackend {
            entries,
            default_lookahead,
        }
    }

    /// Copies every word and never waits.
    pub fn identity() -> Self {
        Self::default()
    }

    /// Reads `source<TAB>target[<TAB>lookahead]` lines; `#` starts a comment.
    pub fn load(path: &Path, default_lookahead: usize) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let parse_err = |line: usize, message: String| Error::Parse {
            path: path.to_path_buf(),
            line,
            message,
        };
        let mut entries = HashMap::new();
        for (n, line) in text.lines().enumerate() {
            let line = line.trim_end_matches('\r');
            if line.trim().is_empty() || line.starts_with('#') {
                continue;
            }
            let cols: Vec<&str> = line.split('\t').collect();
            let (src, tgt) = match cols.as_slice() {
                [s, t] | [s, t, _] if !s.is_empty() && !t.is_empty() => (*s, *t),
                _ => {
                    return Err(parse_err(
                        n + 1,
                        "expected source<TAB>target[<TAB>lookahead]".into(),
                    ))
                }
            };
            if tgt.contains(char::is_whitespace) {
                return Err(parse_err(
                    n + 1,
                    format!("target {tgt:?} must be a single word"),
                ));
            }
            let lookahead = match cols.get(2) {
                Some(l) => l
                    .trim()
                    .parse()
                    .map_err(|_| parse_err(n + 1, format!("bad lookahead {l:?}")))?,
                None => default_lookahead,
            };
            entries.insert(
                src.to_string(),
                DictionaryEntry {
                    target: tgt.to_string(),
                    lookahead,
                },
            );
        }
        Ok(Self::new(entries, default_lookahead))
    }

    fn lookup(&self, word: &str) -> (String, usize) {
        match self.entries.get(word) {
            Some(e) => (e.target.clone(), e.lookahead),
            None => (word.to_string(), self.default_lookahead),
        }
    }
}

impl TranslatorBackend for DictionaryBackend {
    fn next_unit(&mut self, req: &UnitRequest<'_>) -> Result<Unit, BackendError> {
        let t = req.partial_target.len();
        let visible = req.partial_source.len();
        if t >= visible {
            return Ok(if req.source_complete {
                Unit::Eos
            } else {
                Unit::Wait
            });
        }
        let (word, lookahead) = self.lookup(&req.partial_source[t]);
        if req.source_complete || req.suppress_wait || visible > t + lookahead {
            Ok(Unit::Word(word))
        } else {
            Ok(Unit::Wait)
        }
    }
}
