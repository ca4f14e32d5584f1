use std::collections::HashMap;
use std::path::Path;

use anyhow::{bail, Context, Result};
use causal_simt_core::backends::{HttpBackend, Recorder, Recording, RecordingBackend};
use causal_simt_core::engine::{
    run_session, BackendError, DictionaryBackend, ScriptedBackend, SessionConfig, SessionErrorKind,
    SessionTrace, TranslatorBackend,
};
use causal_simt_core::prompt::DEFAULT_WAIT_LITERAL;
use causal_simt_core::stream::{asr_sim_stream, text_stream, AsrSimConfig, Mode, SourceStream};
use causal_simt_core::tokenizer::tokenize;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::config::{BackendKind, ModeArg, RunConfig};
use crate::io::{load_test_set, load_transcripts, read_jsonl, write_atomic, TestItem};
use crate::{Outcome, SimulateArgs};

pub const SUMMARY_FILE: &str = "summary.json";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SessionFailure {
    pub kind: String,
    pub message: String,
}

/// On-disk trace: the session trace plus its id and any failure.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TraceFile {
    pub id: String,
    #[serde(flatten)]
    pub trace: SessionTrace,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<SessionFailure>,
}

pub type BackendFactory<'a> =
    dyn Fn(&str) -> Result<Box<dyn TranslatorBackend>, String> + Sync + 'a;

pub fn trace_file_name(id: &str, k: usize) -> String {
    format!("{id}_k{k}.json")
}

fn failure(kind: &SessionErrorKind) -> SessionFailure {
    let name = match kind {
        SessionErrorKind::Backend(b) => match b {
            BackendError::BackendUnavailable { .. } => "backend_unavailable",
            BackendError::MalformedResponse { .. } => "malformed_response",
            BackendError::ScriptUnderrun { .. } => "script_underrun",
            BackendError::ReplayMiss { .. } => "replay_miss",
            BackendError::Io { .. } => "io",
        },
        SessionErrorKind::WaitOverflow(_) => "wait_overflow",
        SessionErrorKind::HypothesisOverflow(_) => "hypothesis_overflow",
        SessionErrorKind::InvalidWord(_) => "invalid_word",
        SessionErrorKind::InvalidK => "invalid_k",
    };
    SessionFailure {
        kind: name.into(),
        message: kind.to_string(),
    }
}

#[derive(Deserialize)]
struct ScriptLine {
    id: String,
    units: Vec<String>,
}

enum Factory {
    Scripted(HashMap<String, Vec<String>>),
    Dict(DictionaryBackend),
    Replay(Recording),
    Http(HttpBackend),
}

impl Factory {
    fn new(args: &SimulateArgs, cfg: &RunConfig) -> Result<Self> {
        Ok(match cfg.backend {
            BackendKind::Scripted => {
                let path = args
                    .script
                    .as_deref()
                    .context("--backend scripted needs --script")?;
                let mut scripts = HashMap::new();
                for (line, s) in read_jsonl::<ScriptLine>(path)? {
                    if scripts.insert(s.id.clone(), s.units).is_some() {
                        bail!("{}:{line}: duplicate script id {:?}", path.display(), s.id);
                    }
                }
                Factory::Scripted(scripts)
            }
            BackendKind::Dict => Factory::Dict(match &args.dict {
                Some(p) => DictionaryBackend::load(p, cfg.lookahead)?,
                None => DictionaryBackend::new(HashMap::new(), cfg.lookahead),
            }),
            BackendKind::Replay => {
                let path = args
                    .recording
                    .as_deref()
                    .context("--backend replay needs --recording")?;
                Factory::Replay(Recording::load(path)?)
            }
            BackendKind::Http => Factory::Http(HttpBackend::new(cfg.http.clone())?),
        })
    }

    fn make(&self, id: &str) -> Result<Box<dyn TranslatorBackend>, String> {
        Ok(match self {
            Factory::Scripted(s) => {
                let units = s
                    .get(id)
                    .ok_or_else(|| format!("no script for id {id:?}"))?;
                Box::new(ScriptedBackend::from_literals(
                    units.iter().map(String::as_str),
                    DEFAULT_WAIT_LITERAL,
                ))
            }
            Factory::Dict(d) => Box::new(d.clone()),
            Factory::Replay(r) => Box::new(r.backend()),
            Factory::Http(h) => Box::new(h.clone()),
        })
    }
}

fn empty_trace(k: usize, mode: Mode) -> SessionTrace {
    SessionTrace {
        k,
        mode,
        source: vec![],
        hypothesis: vec![],
        delays: vec![],
        source_extent: 0,
        events: vec![],
        wall_ms: None,
    }
}

fn open_stream(item: &TestItem, cfg: &RunConfig) -> Result<Box<dyn SourceStream>, String> {
    match &item.transcript {
        Some(t) => {
            let asr = AsrSimConfig {
                window_ms: cfg.window_ms,
                drop_last_word: true,
            };
            Ok(Box::new(
                asr_sim_stream(t.clone(), asr).map_err(|e| e.to_string())?,
            ))
        }
        None => Ok(Box::new(text_stream(
            &tokenize(&item.source).map_err(|e| e.to_string())?,
        ))),
    }
}

/// Runs one session; never fails, failures are recorded in the trace.
pub fn simulate_one(
    item: &TestItem,
    k: usize,
    cfg: &RunConfig,
    make_backend: &BackendFactory<'_>,
) -> TraceFile {
    let mode = Mode::from(cfg.mode);
    let setup_failure = |message: String| TraceFile {
        id: item.id.clone(),
        trace: empty_trace(k, mode),
        error: Some(SessionFailure {
            kind: "setup".into(),
            message,
        }),
    };
    let mut stream = match open_stream(item, cfg) {
        Ok(s) => s,
        Err(e) => return setup_failure(e),
    };
    let mut backend = match make_backend(&item.id) {
        Ok(b) => b,
        Err(e) => return setup_failure(e),
    };
    let session = SessionConfig {
        wall_clock: cfg.wall_clock,
        ..SessionConfig::new(k, cfg.template())
    };
    match run_session(stream.as_mut(), &mut backend, &session) {
        Ok(trace) => TraceFile {
            id: item.id.clone(),
            trace,
            error: None,
        },
        Err(e) => TraceFile {
            id: item.id.clone(),
            error: Some(failure(&e.kind)),
            trace: e.partial,
        },
    }
}

#[derive(Debug, Serialize, Deserialize)]
pub struct SummaryEntry {
    pub id: String,
    pub k: usize,
    pub file: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<SessionFailure>,
}

#[derive(Debug, Serialize, Deserialize)]
pub struct Summary {
    pub sessions: Vec<SummaryEntry>,
    pub total: usize,
    pub failed: usize,
}

fn write_trace(dir: &Path, t: &TraceFile) -> Result<String> {
    let name = trace_file_name(&t.id, t.trace.k);
    let mut text = serde_json::to_string_pretty(t)?;
    text.push('\n');
    write_atomic(&dir.join(&name), text.as_bytes())?;
    Ok(name)
}

pub fn run(args: &SimulateArgs, cfg: &RunConfig) -> Result<Outcome> {
    let items = match (cfg.mode, &args.test_set, &args.transcripts) {
        (ModeArg::Text, Some(p), None) => load_test_set(p)?,
        (ModeArg::Speech, None, Some(d)) => load_transcripts(d)?,
        (ModeArg::Text, _, _) => bail!("text mode takes --test-set (and no --transcripts)"),
        (ModeArg::Speech, _, _) => bail!("speech mode takes --transcripts (and no --test-set)"),
    };
    if args.record.is_some() && cfg.backend == BackendKind::Replay {
        bail!("--record cannot wrap the replay backend");
    }
    let factory = Factory::new(args, cfg)?;
    let recorder = args.record.as_deref().map(Recorder::create).transpose()?;
    let make_backend = |id: &str| -> Result<Box<dyn TranslatorBackend>, String> {
        let inner = factory.make(id)?;
        Ok(match &recorder {
            Some(r) => Box::new(RecordingBackend::new(inner, r.clone())),
            None => inner,
        })
    };

    std::fs::create_dir_all(&args.out_dir)
        .with_context(|| format!("creating {}", args.out_dir.display()))?;
    let jobs: Vec<(&TestItem, usize)> = items
        .iter()
        .flat_map(|item| cfg.k.iter().map(move |&k| (item, k)))
        .collect();
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(cfg.workers)
        .build()?;
    let results: Vec<Result<SummaryEntry>> = pool.install(|| {
        jobs.par_iter()
            .map(|&(item, k)| {
                let t = simulate_one(item, k, cfg, &make_backend);
                let file = write_trace(&args.out_dir, &t)?;
                Ok(SummaryEntry {
                    id: t.id,
                    k,
                    file,
                    error: t.error,
                })
            })
            .collect()
    });
    let sessions = results.into_iter().collect::<Result<Vec<_>>>()?;

    let failed = sessions.iter().filter(|s| s.error.is_some()).count();
    for s in sessions.iter().filter(|s| s.error.is_some()) {
        let e = s.error.as_ref().expect("filtered");
        eprintln!("{} (k={}): {}: {}", s.id, s.k, e.kind, e.message);
    }
    let summary = Summary {
        total: sessions.len(),
        failed,
        sessions,
    };
    let mut text = serde_json::to_string_pretty(&summary)?;
    text.push('\n');
    write_atomic(&args.out_dir.join(SUMMARY_FILE), text.as_bytes())?;
    println!(
        "{} sessions ({} failed) -> {}",
        summary.total,
        failed,
        args.out_dir.display()
    );
    Ok(if failed > 0 {
        Outcome::PartialFailure
    } else {
        Outcome::Success
    })
}
