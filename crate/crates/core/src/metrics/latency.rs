//! Sentence-level latency: AL, LAAL, AP and DAL.
//!
//! `g(t)` is the amount of source consumed when target word `t` was written,
//! in words or in milliseconds; `source_len` is in the same unit.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DelaySequence {
    pub g: Vec<f64>,
    pub source_len: f64,
    /// Reference length in words, needed for LAAL.
    pub ref_len: Option<usize>,
}

impl DelaySequence {
    pub fn new(g: Vec<f64>, source_len: f64, ref_len: Option<usize>) -> Result<Self> {
        if g.is_empty() {
            return Err(Error::DegenerateInput("empty hypothesis"));
        }
        if source_len <= 0.0 {
            return Err(Error::DegenerateInput("empty source"));
        }
        if ref_len == Some(0) {
            return Err(Error::DegenerateInput("empty reference"));
        }
        if g.windows(2).any(|w| w[1] < w[0]) {
            return Err(Error::InvalidArgument(
                "delays must be non-decreasing".into(),
            ));
        }
        if g.iter().any(|&d| !(0.0..=source_len).contains(&d)) {
            return Err(Error::InvalidArgument(format!(
                "delays must lie in [0, {source_len}]"
            )));
        }
        Ok(DelaySequence {
            g,
            source_len,
            ref_len,
        })
    }

    pub fn from_counts(g: &[u64], source_len: u64, ref_len: Option<usize>) -> Result<Self> {
        Self::new(
            g.iter().map(|&d| d as f64).collect(),
            source_len as f64,
            ref_len,
        )
    }

    pub fn hyp_len(&self) -> usize {
        self.g.len()
    }

    /// Index (1-based) of the first word written with the whole source
    /// consumed, or `None` when that never happened.
    pub fn cutoff(&self) -> Option<usize> {
        self.g
            .iter()
            .position(|&d| d >= self.source_len)
            .map(|i| i + 1)
    }
}

fn lagging(d: &DelaySequence, target_len: usize) -> f64 {
    let gamma = target_len as f64 / d.source_len;
    let tau = d.cutoff().unwrap_or(d.hyp_len());
    let sum: f64 = d.g[..tau]
        .iter()
        .enumerate()
        .map(|(t, &g)| g - t as f64 / gamma)
        .sum();
    sum / tau as f64
}

pub fn average_lagging(d: &DelaySequence) -> f64 {
    lagging(d, d.hyp_len())
}

pub fn length_adaptive_al(d: &DelaySequence) -> Result<f64> {
    let r = d
        .ref_len
        .ok_or_else(|| Error::InvalidArgument("LAAL needs the reference length".into()))?;
    Ok(lagging(d, d.hyp_len().max(r)))
}

pub fn average_proportion(d: &DelaySequence) -> f64 {
    d.g.iter().sum::<f64>() / (d.source_len * d.hyp_len() as f64)
}

pub fn differentiable_al(d: &DelaySequence) -> f64 {
    let gamma = d.hyp_len() as f64 / d.source_len;
    let mut prev = f64::NEG_INFINITY;
    let mut sum = 0.0;
    for (t, &g) in d.g.iter().enumerate() {
        let smoothed = if t == 0 { g } else { g.max(prev + 1.0 / gamma) };
        sum += smoothed - t as f64 / gamma;
        prev = smoothed;
    }
    sum / d.hyp_len() as f64
}

pub fn real_time_factor(processing_ms: f64, audio_ms: f64) -> Result<f64> {
    if audio_ms <= 0.0 {
        return Err(Error::DegenerateInput("zero audio duration"));
    }
    Ok(processing_ms / audio_ms)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SentenceLatency {
    pub al: f64,
    pub laal: f64,
    pub ap: f64,
    pub dal: f64,
    /// The whole source was never consumed before a write.
    pub truncated: bool,
}

pub fn sentence_latency(d: &DelaySequence) -> Result<SentenceLatency> {
    Ok(SentenceLatency {
        al: average_lagging(d),
        laal: length_adaptive_al(d)?,
        ap: average_proportion(d),
        dal: differentiable_al(d),
        truncated: d.cutoff().is_none(),
    })
}
