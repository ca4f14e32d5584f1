//! Causality check that reads the corpus as plain JSON, without the
//! builder's types.

use anyhow::{Context, Result};
use serde_json::Value;

use crate::{Outcome, VerifyArgs};

const WAIT: &str = "<WAIT>";
const FILLER: &str = "<FILLER>";

#[derive(Debug, Default, PartialEq, Eq)]
pub struct VerifyReport {
    pub pairs: usize,
    /// `(pair index, problem)`.
    pub violations: Vec<(usize, String)>,
}

impl VerifyReport {
    pub fn passed(&self) -> bool {
        self.violations.is_empty()
    }
}

fn words(v: &Value, key: &str) -> Result<Vec<String>, String> {
    v.get(key)
        .and_then(Value::as_array)
        .ok_or(format!("missing array {key:?}"))?
        .iter()
        .map(|w| {
            w.as_str()
                .map(String::from)
                .ok_or(format!("non-string in {key:?}"))
        })
        .collect()
}

fn count(v: &Value, key: &str) -> Result<usize, String> {
    v.get(key)
        .and_then(Value::as_u64)
        .map(|n| n as usize)
        .ok_or(format!("missing count {key:?}"))
}

fn check(v: &Value) -> Result<(), String> {
    let source = words(v, "source")?;
    let target = words(v, "target")?;
    if source.len() != target.len() {
        return Err(format!(
            "source has {} positions, target {}",
            source.len(),
            target.len()
        ));
    }
    if source.iter().any(|w| w == WAIT) || target.iter().any(|w| w == FILLER) {
        return Err("marker on the wrong side".into());
    }
    let fillers = source.iter().filter(|w| *w == FILLER).count();
    if source[source.len() - fillers..].iter().any(|w| w != FILLER) {
        return Err("fillers are not a contiguous suffix".into());
    }
    if fillers != count(v, "fillers")? {
        return Err(format!(
            "{fillers} fillers but the record says {}",
            count(v, "fillers")?
        ));
    }
    let waits = target.iter().filter(|w| *w == WAIT).count();
    if waits != count(v, "waits")? {
        return Err(format!(
            "{waits} WAITs but the record says {}",
            count(v, "waits")?
        ));
    }

    let positions: Vec<usize> = target
        .iter()
        .enumerate()
        .filter(|(_, w)| *w != WAIT)
        .map(|(i, _)| i)
        .collect();
    let src_len = source.len() - fillers;
    let links = v
        .get("links")
        .and_then(Value::as_array)
        .ok_or("missing links")?;
    for link in links {
        let pair = link
            .as_array()
            .filter(|a| a.len() == 2)
            .and_then(|a| Some((a[0].as_u64()? as usize, a[1].as_u64()? as usize)))
            .ok_or_else(|| format!("bad link {link}"))?;
        let (i, j) = pair;
        if i >= src_len || j >= positions.len() {
            return Err(format!(
                "link {i}-{j} outside a {src_len}x{} pair",
                positions.len()
            ));
        }
        if positions[j] < i {
            return Err(format!(
                "target word {j} sits at {} before linked source word {i}",
                positions[j]
            ));
        }
    }
    Ok(())
}

pub fn verify_text(text: &str) -> VerifyReport {
    let mut report = VerifyReport::default();
    for line in text.lines().filter(|l| !l.trim().is_empty()) {
        let index = report.pairs;
        report.pairs += 1;
        let result = serde_json::from_str::<Value>(line)
            .map_err(|e| format!("invalid JSON: {e}"))
            .and_then(|v| check(&v));
        if let Err(problem) = result {
            report.violations.push((index, problem));
        }
    }
    report
}

pub fn run(args: &VerifyArgs) -> Result<Outcome> {
    let text = std::fs::read_to_string(&args.input)
        .with_context(|| format!("reading {}", args.input.display()))?;
    let report = verify_text(&text);
    if report.pairs == 0 {
        eprintln!("warning: {} holds no pairs", args.input.display());
    }
    for (index, problem) in &report.violations {
        println!("pair {index}: {problem}");
    }
    println!(
        "{} pairs checked, {} violations",
        report.pairs,
        report.violations.len()
    );
    Ok(if report.passed() {
        Outcome::Success
    } else {
        Outcome::VerificationFailed
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn accepts_builder_shape() {
        let ok = r#"{"source":["a","b","<FILLER>"],"target":["<WAIT>","x","y"],"waits":1,"fillers":1,"links":[[1,0],[0,1]]}"#;
        assert!(verify_text(ok).passed());
    }

    #[test]
    fn flags_removed_wait() {
        let bad = r#"{"source":["a","b"],"target":["x","y"],"waits":0,"fillers":0,"links":[[1,0],[0,1]]}"#;
        let r = verify_text(&format!("{bad}\n{bad}\n"));
        assert_eq!(r.pairs, 2);
        assert_eq!(r.violations.len(), 2);
        assert_eq!(r.violations[1].0, 1);
    }

    #[test]
    fn flags_bad_padding_and_counts() {
        let interior =
            r#"{"source":["<FILLER>","a"],"target":["x","y"],"waits":0,"fillers":1,"links":[]}"#;
        assert!(!verify_text(interior).passed());
        let counts = r#"{"source":["a"],"target":["x"],"waits":2,"fillers":0,"links":[]}"#;
        assert!(!verify_text(counts).passed());
        assert!(!verify_text("not json").passed());
    }

    #[test]
    fn empty_input_passes() {
        let r = verify_text("\n");
        assert_eq!(r.pairs, 0);
        assert!(r.passed());
    }
}
