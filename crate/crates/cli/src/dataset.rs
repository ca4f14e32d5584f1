use std::path::PathBuf;

use anyhow::{bail, Result};
use causal_simt_core::causal::{CausalPair, FILLER, WAIT};
use causal_simt_core::sft::{emit_samples, export_training_meta, SftConfig};

use crate::config::RunConfig;
use crate::io::{jsonl, read_jsonl, write_atomic};
use crate::{BuildDatasetArgs, Outcome};

/// Structural checks the sampler relies on.
fn check_record(index: usize, p: &CausalPair) -> Result<()> {
    let count = |v: &[String], m: &str| v.iter().filter(|w| *w == m).count();
    if p.source_words.len() != p.target_words.len() {
        bail!(
            "record {index}: source has {} positions, target {}",
            p.source_words.len(),
            p.target_words.len()
        );
    }
    if p.source_words.is_empty() {
        bail!("record {index}: empty pair");
    }
    if count(&p.target_words, WAIT) != p.wait_count
        || count(&p.source_words, FILLER) != p.filler_count
    {
        bail!("record {index}: WAIT/filler counts disagree with the words");
    }
    Ok(())
}

pub fn run(args: &BuildDatasetArgs, cfg: &RunConfig) -> Result<Outcome> {
    let corpus: Vec<CausalPair> = read_jsonl(&args.input)?
        .into_iter()
        .map(|(_, p)| p)
        .collect();
    for (i, p) in corpus.iter().enumerate() {
        check_record(i, p)?;
    }
    let sft = SftConfig {
        template: cfg.template(),
        seed: cfg.seed,
        samples_per_pair: cfg.samples_per_pair,
        ..SftConfig::new(&cfg.target_language)
    };
    let samples: Vec<_> = emit_samples(&corpus, &sft)?.collect();
    write_atomic(&args.output, jsonl(&samples)?.as_bytes())?;

    let meta_path = args.meta.clone().unwrap_or_else(|| {
        let mut p = args.output.clone().into_os_string();
        p.push(".meta.json");
        PathBuf::from(p)
    });
    let mut meta = serde_json::to_string_pretty(&export_training_meta(&sft))?;
    meta.push('\n');
    write_atomic(&meta_path, meta.as_bytes())?;

    println!(
        "{} samples from {} pairs -> {} (metadata {})",
        samples.len(),
        corpus.len(),
        args.output.display(),
        meta_path.display()
    );
    Ok(Outcome::Success)
}
