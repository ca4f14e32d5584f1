//! Causal alignment of sentence pairs.
//!
//! Target words are delayed (never reordered) by inserting [`WAIT`] markers
//! until every linked target word sits at an index no smaller than the
//! largest source index it is linked to. The shorter side is then padded:
//! [`FILLER`]s at the source end, or [`WAIT`]s at the target end.

use serde::{Deserialize, Serialize};

use crate::aligner::{align_pair, AlignmentLinkSet, TranslationTable};
use crate::error::{Error, Result};
use crate::tokenizer::{tokenize, TokenizedSentence};

pub const WAIT: &str = "<WAIT>";
pub const FILLER: &str = "<FILLER>";

/// One record of the causal corpus (JSON-lines).
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CausalPair {
    #[serde(rename = "source")]
    pub source_words: Vec<String>,
    #[serde(rename = "target")]
    pub target_words: Vec<String>,
    #[serde(rename = "waits")]
    pub wait_count: usize,
    #[serde(rename = "fillers")]
    pub filler_count: usize,
    /// Links over the original (pre-insertion) indices.
    pub links: Vec<(usize, usize)>,
}

impl CausalPair {
    /// Number of aligned positions; both sides have this length.
    pub fn aligned_len(&self) -> usize {
        self.source_words.len()
    }

    pub fn original_source(&self) -> Vec<String> {
        self.source_words
            .iter()
            .filter(|w| *w != FILLER)
            .cloned()
            .collect()
    }

    pub fn original_target(&self) -> Vec<String> {
        self.target_words
            .iter()
            .filter(|w| *w != WAIT)
            .cloned()
            .collect()
    }

    pub fn origin_links(&self) -> AlignmentLinkSet {
        AlignmentLinkSet {
            links: self.links.iter().copied().collect(),
            source_len: self.source_words.len() - self.filler_count,
            target_len: self.target_words.len() - self.wait_count,
        }
    }
}

pub fn causal_align(
    src: &TokenizedSentence,
    tgt: &TokenizedSentence,
    links: &AlignmentLinkSet,
) -> CausalPair {
    debug_assert_eq!(links.source_len, src.len());
    debug_assert_eq!(links.target_len, tgt.len());

    // constraint index per target word: the largest linked source index
    let mut constraint: Vec<Option<usize>> = vec![None; tgt.len()];
    for &(i, j) in &links.links {
        constraint[j] = Some(constraint[j].map_or(i, |c: usize| c.max(i)));
    }

    let mut target = Vec::with_capacity(tgt.len() + src.len());
    let mut waits = 0;
    for (word, c) in tgt.words.iter().zip(&constraint) {
        if let Some(c) = *c {
            while target.len() < c {
                target.push(WAIT.to_string());
                waits += 1;
            }
        }
        target.push(word.clone());
    }

    let mut source = src.words.clone();
    let mut fillers = 0;
    while source.len() < target.len() {
        source.push(FILLER.to_string());
        fillers += 1;
    }
    while target.len() < source.len() {
        target.push(WAIT.to_string());
        waits += 1;
    }

    CausalPair {
        source_words: source,
        target_words: target,
        wait_count: waits,
        filler_count: fillers,
        links: links.links.iter().copied().collect(),
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct CorpusStats {
    pub pairs: usize,
    pub total_waits: usize,
    pub total_fillers: usize,
    pub mean_waits: f64,
    pub mean_fillers: f64,
}

impl CorpusStats {
    pub fn of(corpus: &[CausalPair]) -> Self {
        let pairs = corpus.len();
        let total_waits: usize = corpus.iter().map(|p| p.wait_count).sum();
        let total_fillers: usize = corpus.iter().map(|p| p.filler_count).sum();
        let mean = |n: usize| {
            if pairs == 0 {
                0.0
            } else {
                n as f64 / pairs as f64
            }
        };
        CorpusStats {
            pairs,
            total_waits,
            total_fillers,
            mean_waits: mean(total_waits),
            mean_fillers: mean(total_fillers),
        }
    }
}

/// Where the word links of each pair come from.
pub enum LinkSource<'a> {
    Trained {
        forward: &'a TranslationTable,
        reverse: &'a TranslationTable,
    },
    /// One link set per pair, e.g. from [`crate::aligner::import_alignments`].
    Imported(&'a [AlignmentLinkSet]),
}

pub fn build_corpus(
    pairs: &[(TokenizedSentence, TokenizedSentence)],
    links: LinkSource<'_>,
) -> Result<(Vec<CausalPair>, CorpusStats)> {
    if let LinkSource::Imported(sets) = &links {
        if sets.len() != pairs.len() {
            return Err(Error::InputMismatch(format!(
                "{} link sets for {} pairs",
                sets.len(),
                pairs.len()
            )));
        }
    }
    let mut corpus = Vec::with_capacity(pairs.len());
    for (index, (src, tgt)) in pairs.iter().enumerate() {
        let set = match &links {
            LinkSource::Trained { forward, reverse } => align_pair(src, tgt, forward, reverse),
            LinkSource::Imported(sets) => {
                let set = &sets[index];
                if set.source_len != src.len() || set.target_len != tgt.len() {
                    return Err(Error::Pair {
                        index,
                        source: Box::new(Error::InputMismatch(format!(
                            "link set is {}x{} but the pair is {}x{}",
                            set.source_len,
                            set.target_len,
                            src.len(),
                            tgt.len()
                        ))),
                    });
                }
                set.clone()
            }
        };
        corpus.push(causal_align(src, tgt, &set));
    }
    let stats = CorpusStats::of(&corpus);
    Ok((corpus, stats))
}

/// Tokenizes raw sentence pairs, tagging failures with the pair index.
pub fn tokenize_corpus<S: AsRef<str>>(
    raw: &[(S, S)],
) -> Result<Vec<(TokenizedSentence, TokenizedSentence)>> {
    raw.iter()
        .enumerate()
        .map(|(index, (s, t))| {
            let wrap = |e| Error::Pair {
                index,
                source: Box::new(e),
            };
            Ok((
                tokenize(s.as_ref()).map_err(wrap)?,
                tokenize(t.as_ref()).map_err(wrap)?,
            ))
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ts(words: &[&str]) -> TokenizedSentence {
        TokenizedSentence::from_words(words)
    }

    fn links(s: usize, t: usize, l: &[(usize, usize)]) -> AlignmentLinkSet {
        AlignmentLinkSet::new(s, t, l.iter().copied()).unwrap()
    }

    #[test]
    fn monotone_identity_needs_nothing() {
        let p = causal_align(
            &ts(&["a", "b"]),
            &ts(&["x", "y"]),
            &links(2, 2, &[(0, 0), (1, 1)]),
        );
        assert_eq!(p.target_words, ["x", "y"]);
        assert_eq!(p.source_words, ["a", "b"]);
        assert_eq!((p.wait_count, p.filler_count), (0, 0));
    }

    #[test]
    fn inverted_pair_gets_one_wait_and_one_filler() {
        let p = causal_align(
            &ts(&["a", "b"]),
            &ts(&["x", "y"]),
            &links(2, 2, &[(1, 0), (0, 1)]),
        );
        assert_eq!(p.target_words, [WAIT, "x", "y"]);
        assert_eq!(p.source_words, ["a", "b", FILLER]);
        assert_eq!((p.wait_count, p.filler_count), (1, 1));
    }

    #[test]
    fn late_link_pushes_single_word() {
        let p = causal_align(
            &ts(&["s0", "s1", "s2", "s3"]),
            &ts(&["t0"]),
            &links(4, 1, &[(3, 0)]),
        );
        assert_eq!(p.target_words, [WAIT, WAIT, WAIT, "t0"]);
        assert_eq!(p.source_words, ["s0", "s1", "s2", "s3"]);
        assert_eq!(p.filler_count, 0);
    }

    #[test]
    fn longer_source_pads_target_with_waits() {
        let p = causal_align(&ts(&["a", "b", "c"]), &ts(&["x"]), &links(3, 1, &[(0, 0)]));
        assert_eq!(p.target_words, ["x", WAIT, WAIT]);
        assert_eq!(p.wait_count, 2);
    }

    #[test]
    fn multi_linked_word_waits_for_last_source() {
        let p = causal_align(
            &ts(&["a", "b", "c"]),
            &ts(&["x", "y"]),
            &links(3, 2, &[(0, 0), (2, 0)]),
        );
        assert_eq!(p.target_words, [WAIT, WAIT, "x", "y"]);
        assert_eq!(p.source_words, ["a", "b", "c", FILLER]);
    }

    #[test]
    fn corpus_stats() {
        let pairs = vec![
            (ts(&["a", "b"]), ts(&["x", "y"])),
            (ts(&["c", "d"]), ts(&["z", "w"])),
        ];
        let sets = vec![
            links(2, 2, &[(0, 0), (1, 1)]),
            links(2, 2, &[(0, 0), (1, 1)]),
        ];
        let (corpus, stats) = build_corpus(&pairs, LinkSource::Imported(&sets)).unwrap();
        assert_eq!(corpus.len(), 2);
        assert_eq!(stats.total_waits, 0);

        let inverted = vec![links(2, 2, &[(1, 0), (0, 1)])];
        let (_, stats) = build_corpus(&pairs[..1], LinkSource::Imported(&inverted)).unwrap();
        assert_eq!((stats.total_waits, stats.total_fillers), (1, 1));

        let (empty, stats) = build_corpus(&[], LinkSource::Imported(&[])).unwrap();
        assert!(empty.is_empty());
        assert_eq!(stats.pairs, 0);
    }

    #[test]
    fn tokenize_errors_carry_pair_index() {
        let raw = [("fine.", "gut."), ("  ", "leer")];
        match tokenize_corpus(&raw) {
            Err(Error::Pair { index: 1, .. }) => {}
            other => panic!("unexpected {other:?}"),
        }
    }
}
