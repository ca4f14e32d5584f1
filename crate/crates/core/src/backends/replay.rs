//! Record/replay of backend units keyed by prompt hash.
//!
//! A recording is JSON-lines of `{"prompt_sha256": .., "unit": ..}`. Calls
//! made with WAIT suppressed hash a marker after the prompt, so they never
//! collide with the unsuppressed call for the same prompt.

use std::collections::{HashMap, HashSet};
use std::fs::{File, OpenOptions};
use std::io::{BufWriter, Write};
use std::path::Path;
use std::sync::{Arc, Mutex};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::engine::{BackendError, TranslatorBackend, Unit, UnitRequest};
use crate::error::{Error, Result};

pub fn prompt_key(prompt: &str, suppress_wait: bool) -> String {
    let mut h = Sha256::new();
    h.update(prompt.as_bytes());
    if suppress_wait {
        h.update(b"\0suppress-wait");
    }
    hex::encode(h.finalize())
}

#[derive(Serialize, Deserialize)]
struct RecordLine {
    prompt_sha256: String,
    unit: Unit,
}

struct RecorderInner {
    out: BufWriter<File>,
    seen: HashSet<String>,
}

/// Shared, serialized writer for a recording file.
#[derive(Clone)]
pub struct Recorder {
    inner: Arc<Mutex<RecorderInner>>,
}

impl Recorder {
    /// Starts a fresh recording, truncating `path`.
    pub fn create(path: &Path) -> Result<Self> {
        let file = File::create(path).map_err(|e| Error::io(path, e))?;
        Ok(Self::from_file(file, HashSet::new()))
    }

    /// Appends to an existing recording, skipping prompts it already holds.
    pub fn append(path: &Path) -> Result<Self> {
        let seen = if path.exists() {
            Recording::load(path)?.units.keys().cloned().collect()
        } else {
            HashSet::new()
        };
        let file = OpenOptions::new()
            .create(true)
            .append(true)
            .open(path)
            .map_err(|e| Error::io(path, e))?;
        Ok(Self::from_file(file, seen))
    }

    fn from_file(file: File, seen: HashSet<String>) -> Self {
        Recorder {
            inner: Arc::new(Mutex::new(RecorderInner {
                out: BufWriter::new(file),
                seen,
            })),
        }
    }

    fn write(&self, key: String, unit: &Unit) -> std::io::Result<()> {
        let mut inner = self.inner.lock().unwrap_or_else(|p| p.into_inner());
        if !inner.seen.insert(key.clone()) {
            return Ok(());
        }
        let line = serde_json::to_string(&RecordLine {
            prompt_sha256: key,
            unit: unit.clone(),
        })?;
        writeln!(inner.out, "{line}")?;
        inner.out.flush()
    }
}

/// Wraps a backend and records every unit it returns.
pub struct RecordingBackend<B> {
    inner: B,
    recorder: Recorder,
}

impl<B: TranslatorBackend> RecordingBackend<B> {
    pub fn new(inner: B, recorder: Recorder) -> Self {
        RecordingBackend { inner, recorder }
    }
}

impl<B: TranslatorBackend> TranslatorBackend for RecordingBackend<B> {
    fn next_unit(&mut self, req: &UnitRequest<'_>) -> Result<Unit, BackendError> {
        let unit = self.inner.next_unit(req)?;
        self.recorder
            .write(prompt_key(req.prompt, req.suppress_wait), &unit)
            .map_err(|e| BackendError::Io {
                message: e.to_string(),
            })?;
        Ok(unit)
    }
}

/// A loaded recording; cheap to clone and share between sessions.
#[derive(Debug, Clone, Default)]
pub struct Recording {
    units: Arc<HashMap<String, Unit>>,
}

impl Recording {
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let mut units = HashMap::new();
        for (n, line) in text.lines().enumerate() {
            if line.trim().is_empty() {
                continue;
            }
            let rec: RecordLine = serde_json::from_str(line).map_err(|e| Error::Parse {
                path: path.to_path_buf(),
                line: n + 1,
                message: e.to_string(),
            })?;
            units.entry(rec.prompt_sha256).or_insert(rec.unit);
        }
        Ok(Recording {
            units: Arc::new(units),
        })
    }

    pub fn len(&self) -> usize {
        self.units.len()
    }

    pub fn is_empty(&self) -> bool {
        self.units.is_empty()
    }

    pub fn backend(&self) -> ReplayBackend {
        ReplayBackend {
            recording: self.clone(),
        }
    }
}

pub struct ReplayBackend {
    recording: Recording,
}

impl TranslatorBackend for ReplayBackend {
    fn next_unit(&mut self, req: &UnitRequest<'_>) -> Result<Unit, BackendError> {
        let key = prompt_key(req.prompt, req.suppress_wait);
        match self.recording.units.get(&key) {
            Some(unit) => Ok(unit.clone()),
            None => Err(BackendError::ReplayMiss { prompt_sha256: key }),
        }
    }
}

/// Record mode when `inner` is given (the file is truncated), replay mode
/// otherwise (the file must exist).
pub fn record_replay_backend(
    path: &Path,
    inner: Option<Box<dyn TranslatorBackend>>,
) -> Result<Box<dyn TranslatorBackend>> {
    Ok(match inner {
        Some(inner) => Box::new(RecordingBackend::new(inner, Recorder::create(path)?)),
        None => Box::new(Recording::load(path)?.backend()),
    })
}
