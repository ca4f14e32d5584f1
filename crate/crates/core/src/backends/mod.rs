//! Concrete [`TranslatorBackend`](crate::engine::TranslatorBackend)s.

mod http;
mod replay;

pub use self::http::{
    assemble_unit, CompletionChoice, CompletionRequest, HttpBackend, HttpBackendConfig,
};
pub use self::replay::{
    prompt_key, record_replay_backend, Recorder, Recording, RecordingBackend, ReplayBackend,
};
