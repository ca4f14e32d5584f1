//! Corpus BLEU-4 with the 13a tokenizer, brevity penalty and no smoothing,
//! matching sacrebleu's defaults for a single reference.

use std::collections::HashMap;
use std::sync::LazyLock;

use regex::Regex;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

const MAX_ORDER: usize = 4;

static RULES_13A: LazyLock<Vec<(Regex, &'static str)>> = LazyLock::new(|| {
    [
        (r"([\{-\~\[-\` -\&\(-\+\:-\@\/])", " ${1} "),
        (r"([^0-9])([\.,])", "${1} ${2} "),
        (r"([\.,])([^0-9])", " ${1} ${2}"),
        (r"([0-9])(-)", "${1} ${2} "),
    ]
    .into_iter()
    .map(|(re, rep)| (Regex::new(re).expect("static regex"), rep))
    .collect()
});

pub fn tokenize_13a(line: &str) -> Vec<String> {
    let mut s = line
        .replace("<skipped>", "")
        .replace("-\n", "")
        .replace('\n', " ");
    if s.contains('&') {
        s = s
            .replace("&quot;", "\"")
            .replace("&amp;", "&")
            .replace("&lt;", "<")
            .replace("&gt;", ">");
    }
    let mut s = format!(" {s} ");
    for (re, rep) in RULES_13A.iter() {
        s = re.replace_all(&s, *rep).into_owned();
    }
    s.split_whitespace().map(str::to_string).collect()
}

/// Sufficient statistics; they add up across sentences.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct BleuStats {
    pub correct: [u64; MAX_ORDER],
    pub total: [u64; MAX_ORDER],
    pub sys_len: u64,
    pub ref_len: u64,
}

impl std::ops::AddAssign for BleuStats {
    fn add_assign(&mut self, o: Self) {
        for n in 0..MAX_ORDER {
            self.correct[n] += o.correct[n];
            self.total[n] += o.total[n];
        }
        self.sys_len += o.sys_len;
        self.ref_len += o.ref_len;
    }
}

fn ngrams(words: &[String], n: usize) -> HashMap<&[String], u64> {
    let mut counts = HashMap::new();
    for gram in words.windows(n) {
        *counts.entry(gram).or_insert(0) += 1;
    }
    counts
}

pub fn sentence_stats(hyp: &str, reference: &str) -> BleuStats {
    let h = tokenize_13a(hyp);
    let r = tokenize_13a(reference);
    let mut stats = BleuStats {
        sys_len: h.len() as u64,
        ref_len: r.len() as u64,
        ..Default::default()
    };
    for n in 1..=MAX_ORDER {
        let hc = ngrams(&h, n);
        let rc = ngrams(&r, n);
        stats.total[n - 1] = h.len().saturating_sub(n - 1) as u64;
        stats.correct[n - 1] = hc
            .iter()
            .map(|(g, &c)| c.min(rc.get(g).copied().unwrap_or(0)))
            .sum();
    }
    stats
}

impl BleuStats {
    /// Score on a 0-100 scale.
    pub fn score(&self) -> f64 {
        if (0..MAX_ORDER).any(|n| self.total[n] == 0 || self.correct[n] == 0) {
            return 0.0;
        }
        let log_mean = (0..MAX_ORDER)
            .map(|n| (self.correct[n] as f64 / self.total[n] as f64).ln())
            .sum::<f64>()
            / MAX_ORDER as f64;
        let bp = if self.sys_len < self.ref_len {
            (1.0 - self.ref_len as f64 / self.sys_len as f64).exp()
        } else {
            1.0
        };
        100.0 * bp * log_mean.exp()
    }
}

fn check_lengths<H: AsRef<str>, R: AsRef<str>>(hyps: &[H], refs: &[R]) -> Result<()> {
    if hyps.len() != refs.len() {
        return Err(Error::InputMismatch(format!(
            "{} hypotheses for {} references",
            hyps.len(),
            refs.len()
        )));
    }
    if hyps.is_empty() {
        return Err(Error::DegenerateInput("empty corpus"));
    }
    Ok(())
}

pub fn corpus_stats<H: AsRef<str>, R: AsRef<str>>(
    hyps: &[H],
    refs: &[R],
) -> Result<Vec<BleuStats>> {
    check_lengths(hyps, refs)?;
    Ok(hyps
        .iter()
        .zip(refs)
        .map(|(h, r)| sentence_stats(h.as_ref(), r.as_ref()))
        .collect())
}

pub fn corpus_bleu<H: AsRef<str>, R: AsRef<str>>(hyps: &[H], refs: &[R]) -> Result<f64> {
    let mut total = BleuStats::default();
    for s in corpus_stats(hyps, refs)? {
        total += s;
    }
    Ok(total.score())
}
