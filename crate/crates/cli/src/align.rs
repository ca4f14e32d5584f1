use anyhow::{Context, Result};
use causal_simt_core::aligner::{import_alignments, train_table, Direction};
use causal_simt_core::causal::{build_corpus, tokenize_corpus, LinkSource};
use serde::Deserialize;

use crate::config::RunConfig;
use crate::io::{jsonl, read_jsonl, write_atomic};
use crate::{AlignArgs, Outcome};

#[derive(Deserialize)]
struct RawPair {
    source: String,
    target: String,
}

pub fn run(args: &AlignArgs, cfg: &RunConfig) -> Result<Outcome> {
    let raw: Vec<(String, String)> = read_jsonl::<RawPair>(&args.input)?
        .into_iter()
        .map(|(_, p)| (p.source, p.target))
        .collect();
    let pairs =
        tokenize_corpus(&raw).with_context(|| format!("tokenizing {}", args.input.display()))?;

    let (corpus, stats) = match &args.alignments {
        Some(path) => {
            let sets = import_alignments(path, &pairs)?;
            build_corpus(&pairs, LinkSource::Imported(&sets))?
        }
        None => {
            let forward = train_table(&pairs, cfg.iterations, Direction::Forward)?;
            let reverse = train_table(&pairs, cfg.iterations, Direction::Reverse)?;
            build_corpus(
                &pairs,
                LinkSource::Trained {
                    forward: &forward,
                    reverse: &reverse,
                },
            )?
        }
    };

    write_atomic(&args.output, jsonl(&corpus)?.as_bytes())?;
    println!(
        "{} pairs -> {}: {} WAITs ({:.3}/sentence), {} fillers ({:.3}/sentence)",
        stats.pairs,
        args.output.display(),
        stats.total_waits,
        stats.mean_waits,
        stats.total_fillers,
        stats.mean_fillers
    );
    Ok(Outcome::Success)
}
