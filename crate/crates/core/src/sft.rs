//! Fine-tuning samples from a causal corpus.
//!
//! Each causal pair is cut after `l` aligned positions, `l` drawn uniformly
//! from `1..=L`. Only a trailing WAIT survives the cut and fillers are dropped.
//! The prompt covers everything through `"[/INST] "`; the loss applies to the
//! completion only.
//!
//! Sampling uses ChaCha8 seeded with `u64` (via `rand_chacha`), which yields
//! the same stream on every platform.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::causal::{CausalPair, FILLER, WAIT};
use crate::error::{Error, Result};
use crate::prompt::{PromptTemplate, DEFAULT_WAIT_LITERAL};
use crate::tokenizer::detokenize;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SftConfig {
    pub template: PromptTemplate,
    /// How WAIT is spelled in completions.
    pub wait_literal: String,
    pub seed: u64,
    pub samples_per_pair: usize,
}

impl SftConfig {
    pub fn new(target_language: &str) -> Self {
        SftConfig {
            template: PromptTemplate::interpreter(target_language, DEFAULT_WAIT_LITERAL),
            wait_literal: DEFAULT_WAIT_LITERAL.to_string(),
            seed: 0,
            samples_per_pair: 1,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SampleMeta {
    pub pair_index: usize,
    pub sample_index: usize,
    /// Aligned positions kept (`l`).
    pub trim_len: usize,
    /// Aligned length of the pair (`L`).
    pub aligned_len: usize,
    /// Source words left after the cut, fillers excluded.
    pub source_len: usize,
    /// Character offset in `prompt + completion` where the loss starts.
    pub loss_mask_boundary: usize,
    pub ends_with_wait: bool,
    /// The cut kept the whole pair, so an end-of-sequence token belongs after
    /// the completion.
    pub complete: bool,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SftSample {
    pub prompt: String,
    pub completion: String,
    pub meta: SampleMeta,
}

/// Cuts a causal pair after `l` aligned positions and applies the WAIT and
/// filler drop rules.
pub fn trim_pair(pair: &CausalPair, l: usize) -> Result<(Vec<String>, Vec<String>)> {
    let max = pair.aligned_len();
    if l == 0 || l > max {
        return Err(Error::Range { len: l, max });
    }
    let source: Vec<String> = pair.source_words[..l]
        .iter()
        .filter(|w| *w != FILLER)
        .cloned()
        .collect();
    let cut = &pair.target_words[..l];
    let trailing_wait = cut.last().is_some_and(|w| w == WAIT);
    let mut target: Vec<String> = cut.iter().filter(|w| *w != WAIT).cloned().collect();
    if trailing_wait {
        target.push(WAIT.to_string());
    }
    Ok((source, target))
}

/// Renders a trimmed target with `wait_literal` in place of a trailing WAIT.
pub fn render_completion(partial_target: &[String], wait_literal: &str) -> String {
    match partial_target.split_last() {
        Some((last, rest)) if last == WAIT => {
            let text = detokenize(rest);
            if text.is_empty() {
                wait_literal.to_string()
            } else {
                format!("{text} {wait_literal}")
            }
        }
        _ => detokenize(partial_target),
    }
}

pub fn collate(
    pair_index: usize,
    sample_index: usize,
    pair: &CausalPair,
    l: usize,
    cfg: &SftConfig,
) -> Result<SftSample> {
    let (source, target) = trim_pair(pair, l)?;
    let prompt = cfg.template.render_prefix(&detokenize(&source));
    let completion = render_completion(&target, &cfg.wait_literal);
    let ends_with_wait = target.last().is_some_and(|w| w == WAIT);
    Ok(SftSample {
        meta: SampleMeta {
            pair_index,
            sample_index,
            trim_len: l,
            aligned_len: pair.aligned_len(),
            source_len: source.len(),
            loss_mask_boundary: prompt.chars().count(),
            ends_with_wait,
            complete: l == pair.aligned_len(),
        },
        prompt,
        completion,
    })
}

/// Deterministic sample stream for a given seed.
pub struct SampleStream<'a> {
    corpus: &'a [CausalPair],
    cfg: &'a SftConfig,
    rng: ChaCha8Rng,
    pair: usize,
    sample: usize,
}

impl Iterator for SampleStream<'_> {
    type Item = SftSample;

    fn next(&mut self) -> Option<SftSample> {
        loop {
            let pair = self.corpus.get(self.pair)?;
            if self.sample >= self.cfg.samples_per_pair || pair.aligned_len() == 0 {
                self.pair += 1;
                self.sample = 0;
                continue;
            }
            let l = self.rng.random_range(1..=pair.aligned_len());
            let out = collate(self.pair, self.sample, pair, l, self.cfg).expect("l drawn in range");
            self.sample += 1;
            return Some(out);
        }
    }
}

pub fn emit_samples<'a>(corpus: &'a [CausalPair], cfg: &'a SftConfig) -> Result<SampleStream<'a>> {
    if corpus.is_empty() {
        return Err(Error::EmptyCorpus);
    }
    if cfg.samples_per_pair == 0 {
        return Err(Error::InvalidArgument(
            "samples_per_pair must be at least 1".into(),
        ));
    }
    Ok(SampleStream {
        corpus,
        cfg,
        rng: ChaCha8Rng::seed_from_u64(cfg.seed),
        pair: 0,
        sample: 0,
    })
}

/// Training hyperparameters for an external LoRA trainer. Nothing here is
/// used by this crate; it travels with the dataset as a sidecar.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainingMeta {
    pub base_models: Vec<String>,
    pub load_in_4bit: bool,
    pub lora_r: u32,
    pub lora_alpha: u32,
    pub epochs: u32,
    pub batch_size: u32,
    pub gradient_accumulation_steps: u32,
    pub optimizer: String,
    pub learning_rate: f64,
    pub warmup_steps: u32,
    pub lr_schedule: String,
    pub checkpoint_every_steps: u32,
    pub checkpoint_selection: String,
    /// Vocabulary id the WAIT literal is mapped to (the `<unk>` slot).
    pub wait_token_id: u32,
    pub wait_literal: String,
    pub loss_on: String,
    pub seed: u64,
    pub samples_per_pair: usize,
    pub system_message: Option<String>,
}

pub fn export_training_meta(cfg: &SftConfig) -> TrainingMeta {
    TrainingMeta {
        base_models: vec!["Llama-2-13b-hf".into(), "Llama-2-70b-hf".into()],
        load_in_4bit: true,
        lora_r: 16,
        lora_alpha: 32,
        epochs: 3,
        batch_size: 25,
        gradient_accumulation_steps: 4,
        optimizer: "paged_adamw_32bit".into(),
        learning_rate: 0.00005,
        warmup_steps: 10,
        lr_schedule: "linear_warmup_cosine_decay".into(),
        checkpoint_every_steps: 10,
        checkpoint_selection: "lowest_validation_loss".into(),
        wait_token_id: 0,
        wait_literal: cfg.wait_literal.clone(),
        loss_on: "completion".into(),
        seed: cfg.seed,
        samples_per_pair: cfg.samples_per_pair,
        system_message: cfg.template.system_message.clone(),
    }
}
