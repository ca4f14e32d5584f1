//! Run settings merged from flags, a TOML file, the environment and
//! defaults, in that order of precedence.

use std::path::Path;

use anyhow::{bail, Context, Result};
use causal_simt_core::backends::HttpBackendConfig;
use causal_simt_core::prompt::{PromptTemplate, DEFAULT_WAIT_LITERAL};
use causal_simt_core::stream::Mode;
use clap::ValueEnum;
use serde::{Deserialize, Serialize};

use crate::{Cli, Command};

/// Names the variable that holds the API key; the key itself never appears
/// in flags or files.
pub const API_KEY_ENV_VAR: &str = "SIMT_API_KEY_ENV";

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ModeArg {
    Text,
    Speech,
}

impl From<ModeArg> for Mode {
    fn from(m: ModeArg) -> Mode {
        match m {
            ModeArg::Text => Mode::Text,
            ModeArg::Speech => Mode::Speech,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum BackendKind {
    Scripted,
    Dict,
    Replay,
    Http,
}

/// Keys accepted in the config file. All optional.
#[derive(Debug, Clone, Default, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FileConfig {
    pub seed: Option<u64>,
    pub k: Option<Vec<usize>>,
    pub mode: Option<ModeArg>,
    pub backend: Option<BackendKind>,
    pub workers: Option<usize>,
    pub system_message: Option<bool>,
    pub target_language: Option<String>,
    pub window_ms: Option<u64>,
    pub bootstrap: Option<usize>,
    pub samples_per_pair: Option<usize>,
    pub iterations: Option<usize>,
    pub lookahead: Option<usize>,
    pub wall_clock: Option<bool>,
    pub http: Option<HttpBackendConfig>,
}

impl FileConfig {
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .with_context(|| format!("reading config {}", path.display()))?;
        toml::from_str(&text).with_context(|| format!("parsing config {}", path.display()))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RunConfig {
    pub seed: u64,
    pub k: Vec<usize>,
    pub mode: ModeArg,
    pub backend: BackendKind,
    pub workers: usize,
    pub system_message: bool,
    pub target_language: String,
    pub window_ms: u64,
    pub bootstrap: Option<usize>,
    pub samples_per_pair: usize,
    pub iterations: usize,
    pub lookahead: usize,
    pub wall_clock: bool,
    pub http: HttpBackendConfig,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            seed: 0,
            k: vec![3],
            mode: ModeArg::Text,
            backend: BackendKind::Dict,
            workers: std::thread::available_parallelism().map_or(1, |n| n.get().min(8)),
            system_message: true,
            target_language: "German".into(),
            window_ms: 200,
            bootstrap: None,
            samples_per_pair: 1,
            iterations: causal_simt_core::aligner::DEFAULT_ITERATIONS,
            lookahead: 0,
            wall_clock: false,
            http: HttpBackendConfig::default(),
        }
    }
}

impl RunConfig {
    pub fn resolve(
        cli: &Cli,
        file: &FileConfig,
        env: impl Fn(&str) -> Option<String>,
    ) -> Result<Self> {
        let d = RunConfig::default();
        let mut http = file.http.clone().unwrap_or(d.http);
        http.api_key_env = cli
            .api_key_env
            .clone()
            .or(http.api_key_env)
            .or_else(|| env(API_KEY_ENV_VAR));

        let (samples, iterations, lookahead, wall_clock) = match &cli.command {
            Command::BuildDataset(a) => (a.samples_per_pair, None, None, false),
            Command::Align(a) => (None, a.iterations, None, false),
            Command::Simulate(a) => (None, None, a.lookahead, a.wall_clock),
            _ => (None, None, None, false),
        };

        let cfg = RunConfig {
            seed: cli.seed.or(file.seed).unwrap_or(d.seed),
            k: cli.k.clone().or_else(|| file.k.clone()).unwrap_or(d.k),
            mode: cli.mode.or(file.mode).unwrap_or(d.mode),
            backend: cli.backend.or(file.backend).unwrap_or(d.backend),
            workers: cli.workers.or(file.workers).unwrap_or(d.workers),
            system_message: !cli.no_system_message
                && file.system_message.unwrap_or(d.system_message),
            target_language: cli
                .target_language
                .clone()
                .or_else(|| file.target_language.clone())
                .unwrap_or(d.target_language),
            window_ms: cli.window_ms.or(file.window_ms).unwrap_or(d.window_ms),
            bootstrap: cli.bootstrap.or(file.bootstrap),
            samples_per_pair: samples
                .or(file.samples_per_pair)
                .unwrap_or(d.samples_per_pair),
            iterations: iterations.or(file.iterations).unwrap_or(d.iterations),
            lookahead: lookahead.or(file.lookahead).unwrap_or(d.lookahead),
            wall_clock: wall_clock || file.wall_clock.unwrap_or(d.wall_clock),
            http,
        };
        cfg.validate()?;
        Ok(cfg)
    }

    fn validate(&self) -> Result<()> {
        if self.k.is_empty() || self.k.contains(&0) {
            bail!("k values must be at least 1");
        }
        if self.workers == 0 {
            bail!("workers must be at least 1");
        }
        if self.window_ms == 0 {
            bail!("window-ms must be positive");
        }
        if self.samples_per_pair == 0 {
            bail!("samples-per-pair must be at least 1");
        }
        if self.iterations == 0 {
            bail!("iterations must be at least 1");
        }
        if self.bootstrap.is_some_and(|n| n < 2) {
            bail!("bootstrap needs at least 2 resamples");
        }
        Ok(())
    }

    pub fn template(&self) -> PromptTemplate {
        if self.system_message {
            PromptTemplate::interpreter(&self.target_language, DEFAULT_WAIT_LITERAL)
        } else {
            PromptTemplate::without_system_message()
        }
    }
}
