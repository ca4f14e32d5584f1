//! Rule-based word segmentation.
//!
//! Punctuation marks become standalone words. The rule table is fixed so that
//! tokenization is reproducible across platforms:
//!
//! | rule | example |
//! |------|---------|
//! | split marks in [`SPLIT_MARKS`] | `"Ja, gut."` -> `Ja , gut .` |
//! | keep `,` `.` `:` between digits | `1,000` `3.14` `10:30` |
//! | split a trailing `.` unless the word is an abbreviation | `tea.` -> `tea .`, `U.S.` stays |
//! | split a trailing run of periods as one word | `Wait...` -> `Wait ...` |
//! | split contraction suffixes | `don't` -> `do n't`, `it's` -> `it 's` |
//! | keep in-word apostrophes and hyphens | `O'Brien`, `well-known` |
//!
//! Input is NFC-normalized before splitting. The same table applies to every
//! language.

use unicode_normalization::UnicodeNormalization;

use crate::error::{Error, Result};

/// Marks that are always split off as their own word (unless they sit
/// between two digits, see [`DIGIT_SEPARATORS`]).
pub const SPLIT_MARKS: &[char] = &[
    ',', ';', ':', '!', '?', '"', '(', ')', '[', ']', '{', '}', '«', '»', '„', '“', '”', '‹', '›',
    '—', '–', '…', '¿', '¡', '%', '$',
];

/// Marks kept inside a word when both neighbours are ASCII digits.
pub const DIGIT_SEPARATORS: &[char] = &[',', '.', ':'];

/// Suffixes split from the end of a word, compared case-insensitively.
/// Both the ASCII and the typographic apostrophe are accepted.
pub const CONTRACTION_SUFFIXES: &[&str] = &["n't", "'s", "'re", "'ve", "'ll", "'d", "'m"];

/// Words whose trailing period is kept when they are not sentence-final.
const ABBREVIATIONS: &[&str] = &[
    "mr", "mrs", "ms", "dr", "prof", "st", "jr", "sr", "vs", "etc", "e.g", "i.e", "no", "approx",
];

const ATTACH_LEFT: &[&str] = &[
    ",", ".", ";", ":", "!", "?", ")", "]", "}", "»", "”", "›", "…", "%",
];
const ATTACH_RIGHT: &[&str] = &["(", "[", "{", "«", "„", "“", "‹", "¿", "¡", "$"];

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TokenizedSentence {
    pub words: Vec<String>,
    pub original: String,
}

impl TokenizedSentence {
    /// Wraps an already segmented word list. The original text is rebuilt by
    /// [`detokenize`].
    pub fn from_words<S: AsRef<str>>(words: &[S]) -> Self {
        let words: Vec<String> = words.iter().map(|w| w.as_ref().to_string()).collect();
        let original = detokenize(&words);
        TokenizedSentence { words, original }
    }

    pub fn len(&self) -> usize {
        self.words.len()
    }

    pub fn is_empty(&self) -> bool {
        self.words.is_empty()
    }
}

pub fn tokenize(sentence: &str) -> Result<TokenizedSentence> {
    let normalized: String = sentence.nfc().collect();
    let chunks: Vec<&str> = normalized.split_whitespace().collect();
    if chunks.is_empty() {
        return Err(Error::EmptySentence);
    }

    let mut words = Vec::new();
    let last_chunk = chunks.len() - 1;
    for (ci, chunk) in chunks.iter().enumerate() {
        let pieces = split_marks(chunk);
        let last_piece = pieces.len().saturating_sub(1);
        for (pi, piece) in pieces.into_iter().enumerate() {
            let final_piece = ci == last_chunk && pi == last_piece;
            split_piece(piece, final_piece, &mut words);
        }
    }

    Ok(TokenizedSentence {
        words,
        original: sentence.to_string(),
    })
}

/// Joins words with single spaces, then removes the spaces the rule table
/// says a punctuation word does not take.
pub fn detokenize<S: AsRef<str>>(words: &[S]) -> String {
    let mut out = String::new();
    let mut glue_next = false;
    let mut double_quote_open = false;
    let mut low_quote_open = false;

    for (i, word) in words.iter().enumerate() {
        let word = word.as_ref();
        let (attach_left, attach_right) = match word {
            "\"" => {
                double_quote_open = !double_quote_open;
                (!double_quote_open, double_quote_open)
            }
            "„" => {
                low_quote_open = true;
                (false, true)
            }
            "“" if low_quote_open => {
                low_quote_open = false;
                (true, false)
            }
            w if ATTACH_LEFT.contains(&w) || is_period_run(w) || is_contraction(w) => (true, false),
            w if ATTACH_RIGHT.contains(&w) => (false, true),
            _ => (false, false),
        };
        if i > 0 && !attach_left && !glue_next {
            out.push(' ');
        }
        out.push_str(word);
        glue_next = attach_right;
    }
    out
}

fn is_period_run(word: &str) -> bool {
    !word.is_empty() && word.chars().all(|c| c == '.')
}

fn is_apostrophe(c: char) -> bool {
    c == '\'' || c == '’'
}

/// Folds the typographic apostrophe so suffix matching sees one form.
fn fold_apostrophes(s: &str) -> String {
    s.chars()
        .map(|c| {
            if is_apostrophe(c) {
                '\''
            } else {
                c.to_ascii_lowercase()
            }
        })
        .collect()
}

fn is_contraction(word: &str) -> bool {
    let folded = fold_apostrophes(word);
    CONTRACTION_SUFFIXES.contains(&folded.as_str())
}

/// Splits a whitespace-free chunk at every mark of [`SPLIT_MARKS`] that is
/// not a digit separator.
fn split_marks(chunk: &str) -> Vec<&str> {
    let chars: Vec<(usize, char)> = chunk.char_indices().collect();
    let mut pieces = Vec::new();
    let mut start = 0;
    for (k, &(pos, c)) in chars.iter().enumerate() {
        if !SPLIT_MARKS.contains(&c) {
            continue;
        }
        if DIGIT_SEPARATORS.contains(&c) {
            let before = k > 0 && chars[k - 1].1.is_ascii_digit();
            let after = chars.get(k + 1).is_some_and(|&(_, n)| n.is_ascii_digit());
            if before && after {
                continue;
            }
        }
        if start < pos {
            pieces.push(&chunk[start..pos]);
        }
        let end = pos + c.len_utf8();
        pieces.push(&chunk[pos..end]);
        start = end;
    }
    if start < chunk.len() {
        pieces.push(&chunk[start..]);
    }
    pieces
}

fn split_piece(piece: &str, sentence_final: bool, out: &mut Vec<String>) {
    if piece.chars().count() == 1 || is_period_run(piece) {
        out.push(piece.to_string());
        return;
    }

    let stem = piece.trim_end_matches('.');
    let periods = piece.len() - stem.len();
    if periods > 0 {
        let keep_abbreviation = periods == 1 && !sentence_final && is_abbreviation(stem);
        if !keep_abbreviation {
            push_contraction_split(stem, out);
            out.push(".".repeat(periods));
            return;
        }
    }
    push_contraction_split(piece, out);
}

fn is_abbreviation(stem: &str) -> bool {
    let lower = stem.to_lowercase();
    stem.contains('.') || ABBREVIATIONS.contains(&lower.as_str())
}

fn push_contraction_split(word: &str, out: &mut Vec<String>) {
    let folded = fold_apostrophes(word);
    for suffix in CONTRACTION_SUFFIXES {
        if folded.len() > suffix.len() && folded.ends_with(suffix) {
            // folding maps one char to one char, so char counts line up
            let suffix_chars = suffix.chars().count();
            let split_at = word
                .char_indices()
                .rev()
                .nth(suffix_chars - 1)
                .map(|(i, _)| i)
                .unwrap_or(0);
            let (stem, tail) = word.split_at(split_at);
            let valid_stem = match *suffix {
                "n't" => stem.chars().last().is_some_and(char::is_alphabetic),
                _ => stem.chars().last().is_some_and(|c| !is_apostrophe(c)),
            };
            if valid_stem {
                out.push(stem.to_string());
                out.push(tail.to_string());
                return;
            }
        }
    }
    out.push(word.to_string());
}

/// Collapses whitespace runs to single spaces and trims the ends.
pub fn normalize_whitespace(s: &str) -> String {
    s.split_whitespace().collect::<Vec<_>>().join(" ")
}
