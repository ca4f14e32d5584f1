//! The instruction prompt shared by dataset collation and inference.
//!
//! ```text
//! <s>[INST]
//! <<SYS>>
//!
//! {SYSTEM_MESSAGE}
//! <</SYS>>
//! Translate this text: {PARTIAL_SOURCE} [/INST] {PARTIAL_TARGET}
//! ```
//!
//! Without a system message the `<<SYS>>` block is left out entirely.

use serde::{Deserialize, Serialize};

pub const DEFAULT_WAIT_LITERAL: &str = "<WAIT>";

/// Interpreter instructions. `{TARGET_LANGUAGE}` and `{WAIT_TOKEN}` are
/// substituted by [`PromptTemplate::interpreter`].
pub const INTERPRETER_SYSTEM_MESSAGE: &str = "You are a professional conference interpreter. \
Given an English text you translate it into {TARGET_LANGUAGE} as accurately and as concisely as \
possible, NEVER adding comments of your own. You output translation when the information \
available in the source is unambiguous, otherwise you output the wait token ({WAIT_TOKEN}), not \
flanked by anything else. It's important that you get this right.";

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PromptTemplate {
    pub system_message: Option<String>,
}

impl PromptTemplate {
    pub fn interpreter(target_language: &str, wait_literal: &str) -> Self {
        PromptTemplate {
            system_message: Some(
                INTERPRETER_SYSTEM_MESSAGE
                    .replace("{TARGET_LANGUAGE}", target_language)
                    .replace("{WAIT_TOKEN}", wait_literal),
            ),
        }
    }

    pub fn without_system_message() -> Self {
        PromptTemplate {
            system_message: None,
        }
    }

    /// Everything up to and including `"[/INST] "`.
    pub fn render_prefix(&self, partial_source: &str) -> String {
        match &self.system_message {
            Some(msg) => format!(
                "<s>[INST]\n<<SYS>>\n\n{msg}\n<</SYS>>\nTranslate this text: {partial_source} [/INST] "
            ),
            None => format!("<s>[INST]\nTranslate this text: {partial_source} [/INST] "),
        }
    }

    pub fn render(&self, partial_source: &str, partial_target: &str) -> String {
        let mut prompt = self.render_prefix(partial_source);
        prompt.push_str(partial_target);
        prompt
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn byte_exact_layout() {
        let t = PromptTemplate {
            system_message: Some("SYS".into()),
        };
        assert_eq!(
            t.render("I like", "Ich"),
            "<s>[INST]\n<<SYS>>\n\nSYS\n<</SYS>>\nTranslate this text: I like [/INST] Ich"
        );
        assert_eq!(
            PromptTemplate::without_system_message().render("I", ""),
            "<s>[INST]\nTranslate this text: I [/INST] "
        );
    }

    #[test]
    fn interpreter_message_substitutes_slots() {
        let t = PromptTemplate::interpreter("German", "<WAIT>");
        let msg = t.system_message.unwrap();
        assert!(msg.contains("into German as accurately"));
        assert!(msg.contains("wait token (<WAIT>)"));
        assert!(!msg.contains('{'));
    }
}
