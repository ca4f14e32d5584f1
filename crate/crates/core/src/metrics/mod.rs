//! Quality and latency evaluation over session traces.

mod bleu;
mod latency;

use std::collections::{BTreeMap, HashSet};
use std::fmt::Write as _;
use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

pub use self::bleu::{corpus_bleu, corpus_stats, sentence_stats, tokenize_13a, BleuStats};
pub use self::latency::{
    average_lagging, average_proportion, differentiable_al, length_adaptive_al, real_time_factor,
    sentence_latency, DelaySequence, SentenceLatency,
};
use crate::engine::{EventKind, SessionTrace};
use crate::error::{Error, Result};
use crate::stream::Mode;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum LatencyUnit {
    Words,
    Ms,
}

impl From<Mode> for LatencyUnit {
    fn from(m: Mode) -> Self {
        match m {
            Mode::Text => LatencyUnit::Words,
            Mode::Speech => LatencyUnit::Ms,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LatencyReport {
    pub bleu: f64,
    pub al: f64,
    pub laal: f64,
    pub ap: f64,
    pub dal: f64,
    /// Present when every session carries wall-clock time and audio length.
    pub rtf: Option<f64>,
    pub unit: LatencyUnit,
    pub session_count: usize,
    /// Sessions whose source was never fully consumed before a write.
    pub truncated_sessions: usize,
    /// Sessions with an empty hypothesis; they count for BLEU only.
    pub empty_sessions: usize,
}

/// Mean that does not depend on input order.
fn mean(mut values: Vec<f64>) -> f64 {
    if values.is_empty() {
        return 0.0;
    }
    values.sort_by(f64::total_cmp);
    values.iter().sum::<f64>() / values.len() as f64
}

pub fn delay_sequence(trace: &SessionTrace, reference: &str) -> Result<DelaySequence> {
    let ref_len = reference.split_whitespace().count();
    DelaySequence::from_counts(&trace.delays, trace.source_extent, Some(ref_len))
}

/// Corpus BLEU plus per-sentence latency averaged over sessions.
pub fn latency_report<R: AsRef<str>>(
    traces: &[SessionTrace],
    references: &[R],
) -> Result<LatencyReport> {
    if traces.len() != references.len() {
        return Err(Error::InputMismatch(format!(
            "{} traces for {} references",
            traces.len(),
            references.len()
        )));
    }
    let first = traces
        .first()
        .ok_or(Error::DegenerateInput("no sessions"))?;
    if traces.iter().any(|t| t.mode != first.mode) {
        return Err(Error::InputMismatch(
            "traces mix text and speech mode".into(),
        ));
    }
    let hyps: Vec<String> = traces.iter().map(SessionTrace::hypothesis_text).collect();
    let bleu = corpus_bleu(&hyps, references)?;

    let mut per = Vec::new();
    let mut empty = 0;
    for (t, r) in traces.iter().zip(references) {
        if t.hypothesis.is_empty() {
            empty += 1;
            continue;
        }
        per.push(sentence_latency(&delay_sequence(t, r.as_ref())?)?);
    }
    let col = |f: fn(&SentenceLatency) -> f64| mean(per.iter().map(f).collect());

    let rtf = match first.mode {
        Mode::Speech => {
            let wall: Option<Vec<f64>> = traces.iter().map(|t| t.wall_ms).collect();
            match wall {
                Some(w) => Some(real_time_factor(
                    mean(w) * traces.len() as f64,
                    traces.iter().map(|t| t.source_extent as f64).sum(),
                )?),
                None => None,
            }
        }
        Mode::Text => None,
    };

    Ok(LatencyReport {
        bleu,
        al: col(|s| s.al),
        laal: col(|s| s.laal),
        ap: col(|s| s.ap),
        dal: col(|s| s.dal),
        rtf,
        unit: first.mode.into(),
        session_count: traces.len(),
        truncated_sessions: per.iter().filter(|s| s.truncated).count(),
        empty_sessions: empty,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Spread {
    pub mean: f64,
    /// Sample standard deviation (n - 1).
    pub std: f64,
}

impl Spread {
    fn of(values: Vec<f64>) -> Spread {
        let n = values.len() as f64;
        let m = mean(values.clone());
        let var = values.iter().map(|v| (v - m).powi(2)).sum::<f64>() / (n - 1.0);
        Spread {
            mean: m,
            std: var.sqrt(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BootstrapReport {
    pub resamples: usize,
    pub seed: u64,
    pub bleu: Spread,
    pub al: Spread,
    pub laal: Spread,
    pub ap: Spread,
    pub dal: Spread,
}

/// Recomputes the report on `resamples` draws of the sentence set with
/// replacement.
pub fn bootstrap_report<R: AsRef<str>>(
    traces: &[SessionTrace],
    references: &[R],
    resamples: usize,
    seed: u64,
) -> Result<BootstrapReport> {
    if resamples < 2 {
        return Err(Error::InvalidArgument(
            "bootstrap needs at least 2 resamples".into(),
        ));
    }
    latency_report(traces, references)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n = traces.len();
    let mut reports = Vec::with_capacity(resamples);
    for _ in 0..resamples {
        let idx: Vec<usize> = (0..n).map(|_| rng.random_range(0..n)).collect();
        let t: Vec<SessionTrace> = idx.iter().map(|&i| traces[i].clone()).collect();
        let r: Vec<&str> = idx.iter().map(|&i| references[i].as_ref()).collect();
        reports.push(latency_report(&t, &r)?);
    }
    let col = |f: fn(&LatencyReport) -> f64| Spread::of(reports.iter().map(f).collect());
    Ok(BootstrapReport {
        resamples,
        seed,
        bleu: col(|r| r.bleu),
        al: col(|r| r.al),
        laal: col(|r| r.laal),
        ap: col(|r| r.ap),
        dal: col(|r| r.dal),
    })
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct WaitHistogram {
    /// Source word preceding each WAIT.
    pub counts: BTreeMap<String, usize>,
    pub total: usize,
    pub function_waits: usize,
}

impl WaitHistogram {
    /// Fraction of WAITs that follow a function word; `None` without WAITs.
    pub fn function_share(&self) -> Option<f64> {
        (self.total > 0).then(|| self.function_waits as f64 / self.total as f64)
    }
}

/// Counts the source word before every WAIT. Suppressed WAITs are skipped
/// since they did not delay anything.
pub fn wait_histogram(traces: &[SessionTrace], function_words: &HashSet<String>) -> WaitHistogram {
    let mut h = WaitHistogram::default();
    for t in traces {
        for e in &t.events {
            if let EventKind::Wait {
                after: Some(word),
                suppressed: false,
            } = &e.kind
            {
                *h.counts.entry(word.clone()).or_insert(0) += 1;
                h.total += 1;
                if function_words.contains(&word.to_lowercase()) {
                    h.function_waits += 1;
                }
            }
        }
    }
    h
}

/// One lowercase word per line; blank lines and `#` comments are ignored.
pub fn load_function_words(path: &Path) -> Result<HashSet<String>> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    Ok(text
        .lines()
        .map(str::trim)
        .filter(|l| !l.is_empty() && !l.starts_with('#'))
        .map(str::to_lowercase)
        .collect())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TradeoffRow {
    pub k: usize,
    #[serde(flatten)]
    pub report: LatencyReport,
}

/// Rows sorted by `k`; equal `k`s keep their input order.
pub fn tradeoff_curve(runs: &[(usize, LatencyReport)]) -> Result<Vec<TradeoffRow>> {
    if runs.len() < 2 {
        return Err(Error::InputMismatch(format!(
            "a tradeoff curve needs at least 2 runs, got {}",
            runs.len()
        )));
    }
    let mut rows: Vec<TradeoffRow> = runs
        .iter()
        .map(|(k, r)| TradeoffRow {
            k: *k,
            report: r.clone(),
        })
        .collect();
    rows.sort_by_key(|r| r.k);
    Ok(rows)
}

pub fn curve_csv(rows: &[TradeoffRow]) -> String {
    let mut out = String::from("k,bleu,al,laal,ap,dal,rtf,unit,sessions\n");
    for row in rows {
        let r = &row.report;
        let rtf = r.rtf.map(|v| v.to_string()).unwrap_or_default();
        let unit = match r.unit {
            LatencyUnit::Words => "words",
            LatencyUnit::Ms => "ms",
        };
        let _ = writeln!(
            out,
            "{},{},{},{},{},{},{},{},{}",
            row.k, r.bleu, r.al, r.laal, r.ap, r.dal, rtf, unit, r.session_count
        );
    }
    out
}
