use std::collections::{BTreeMap, HashMap};
use std::path::Path;

use anyhow::{bail, Context, Result};
use causal_simt_core::metrics::{
    bootstrap_report, curve_csv, latency_report, load_function_words, tradeoff_curve,
    wait_histogram, BootstrapReport, LatencyReport, WaitHistogram,
};
use causal_simt_core::Error;
use serde::Serialize;

use crate::config::RunConfig;
use crate::io::{load_items, write_atomic};
use crate::simulate::{TraceFile, SUMMARY_FILE};
use crate::{EvaluateArgs, Outcome};

#[derive(Debug, Serialize)]
pub struct RunReport {
    pub k: usize,
    pub report: LatencyReport,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub bootstrap: Option<BootstrapReport>,
    /// Failed sessions left out of the scores.
    pub failed_sessions: usize,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub wait_histogram: Option<WaitHistogram>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub function_share: Option<f64>,
}

#[derive(Debug, Serialize)]
pub struct Evaluation {
    pub runs: Vec<RunReport>,
}

pub fn load_traces(dir: &Path) -> Result<Vec<TraceFile>> {
    let mut paths: Vec<_> = std::fs::read_dir(dir)
        .with_context(|| format!("reading {}", dir.display()))?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| {
            p.extension().is_some_and(|x| x == "json")
                && p.file_name().is_some_and(|n| n != SUMMARY_FILE)
        })
        .collect();
    paths.sort();
    paths
        .iter()
        .map(|p| {
            let text =
                std::fs::read_to_string(p).with_context(|| format!("reading {}", p.display()))?;
            serde_json::from_str(&text).with_context(|| format!("parsing trace {}", p.display()))
        })
        .collect()
}

pub fn evaluate(
    traces: Vec<TraceFile>,
    references: &HashMap<String, String>,
    cfg: &RunConfig,
    function_words: Option<&std::collections::HashSet<String>>,
) -> Result<Evaluation> {
    let mut by_k: BTreeMap<usize, Vec<TraceFile>> = BTreeMap::new();
    for t in traces {
        by_k.entry(t.trace.k).or_default().push(t);
    }
    let mut runs = Vec::new();
    for (k, mut group) in by_k {
        group.sort_by(|a, b| a.id.cmp(&b.id));
        let failed_sessions = group.iter().filter(|t| t.error.is_some()).count();
        let ok: Vec<TraceFile> = group.into_iter().filter(|t| t.error.is_none()).collect();
        if ok.is_empty() {
            bail!("every session for k={k} failed");
        }
        let mut refs = Vec::with_capacity(ok.len());
        for t in &ok {
            let r = references
                .get(&t.id)
                .ok_or_else(|| Error::InputMismatch(format!("no reference for id {:?}", t.id)))?;
            refs.push(r.as_str());
        }
        let traces: Vec<_> = ok.into_iter().map(|t| t.trace).collect();
        let report = latency_report(&traces, &refs).with_context(|| format!("k={k}"))?;
        let bootstrap = cfg
            .bootstrap
            .map(|n| bootstrap_report(&traces, &refs, n, cfg.seed))
            .transpose()?;
        let histogram = function_words.map(|fw| wait_histogram(&traces, fw));
        runs.push(RunReport {
            k,
            report,
            bootstrap,
            failed_sessions,
            function_share: histogram.as_ref().and_then(WaitHistogram::function_share),
            wait_histogram: histogram,
        });
    }
    if runs.is_empty() {
        bail!("no traces found");
    }
    Ok(Evaluation { runs })
}

pub fn run(args: &EvaluateArgs, cfg: &RunConfig) -> Result<Outcome> {
    let traces = load_traces(&args.traces)?;
    let mut references = HashMap::new();
    for item in load_items(&args.references)? {
        if let Some(r) = item.reference {
            references.insert(item.id, r);
        }
    }
    let function_words = args
        .function_words
        .as_deref()
        .map(load_function_words)
        .transpose()?;
    let eval = evaluate(traces, &references, cfg, function_words.as_ref())?;

    let mut json = serde_json::to_string_pretty(&eval)?;
    json.push('\n');
    match &args.output {
        Some(p) => write_atomic(p, json.as_bytes())?,
        None => print!("{json}"),
    }
    if let Some(path) = &args.curve {
        let runs: Vec<_> = eval.runs.iter().map(|r| (r.k, r.report.clone())).collect();
        let rows = tradeoff_curve(&runs)?;
        write_atomic(path, curve_csv(&rows).as_bytes())?;
    }
    if args.output.is_some() {
        for r in &eval.runs {
            let rep = &r.report;
            println!(
                "k={} BLEU={:.2} AL={:.3} LAAL={:.3} AP={:.3} DAL={:.3} sessions={} failed={}",
                r.k,
                rep.bleu,
                rep.al,
                rep.laal,
                rep.ap,
                rep.dal,
                rep.session_count,
                r.failed_sessions
            );
        }
    }
    Ok(Outcome::Success)
}
