//! Seeded synthetic corpora for tests, benchmarks and demos.

use rand::seq::{IndexedRandom, SliceRandom};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::aligner::AlignmentLinkSet;
use crate::tokenizer::TokenizedSentence;

/// A parallel corpus whose target side is a word-substitution cipher of the
/// source, in the same order. The gold alignment is the identity.
#[derive(Debug, Clone)]
pub struct CipherCorpus {
    pub pairs: Vec<(TokenizedSentence, TokenizedSentence)>,
    pub gold: Vec<AlignmentLinkSet>,
    /// source word -> cipher word
    pub dictionary: Vec<(String, String)>,
}

pub fn source_word(n: usize) -> String {
    format!("w{n}")
}

/// Builds `pairs` sentence pairs over a `vocab`-word lexicon. Sentence
/// lengths are drawn from `min_len..=max_len` and words are sampled without
/// replacement, so `max_len` must not exceed `vocab`.
pub fn cipher_corpus(
    pairs: usize,
    vocab: usize,
    min_len: usize,
    max_len: usize,
    seed: u64,
) -> CipherCorpus {
    assert!(min_len >= 1 && min_len <= max_len && max_len <= vocab);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut cipher: Vec<usize> = (0..vocab).collect();
    cipher.shuffle(&mut rng);
    let dictionary: Vec<(String, String)> = (0..vocab)
        .map(|n| (source_word(n), format!("c{}", cipher[n])))
        .collect();

    let ids: Vec<usize> = (0..vocab).collect();
    let mut out = Vec::with_capacity(pairs);
    let mut gold = Vec::with_capacity(pairs);
    for _ in 0..pairs {
        let len = rng.random_range(min_len..=max_len);
        let words: Vec<usize> = ids.choose_multiple(&mut rng, len).copied().collect();
        let src: Vec<&str> = words.iter().map(|&n| dictionary[n].0.as_str()).collect();
        let tgt: Vec<&str> = words.iter().map(|&n| dictionary[n].1.as_str()).collect();
        out.push((
            TokenizedSentence::from_words(&src),
            TokenizedSentence::from_words(&tgt),
        ));
        gold.push(AlignmentLinkSet::new(len, len, (0..len).map(|k| (k, k))).expect("in bounds"));
    }
    CipherCorpus {
        pairs: out,
        gold,
        dictionary,
    }
}

/// A random sentence pair of the given lengths with a random one-to-one
/// alignment between `min(source_len, target_len)` positions.
pub fn permuted_pair(
    rng: &mut impl Rng,
    source_len: usize,
    target_len: usize,
) -> (TokenizedSentence, TokenizedSentence, AlignmentLinkSet) {
    let src: Vec<String> = (0..source_len).map(|i| format!("s{i}")).collect();
    let tgt: Vec<String> = (0..target_len).map(|j| format!("t{j}")).collect();
    let mut sources: Vec<usize> = (0..source_len).collect();
    let mut targets: Vec<usize> = (0..target_len).collect();
    sources.shuffle(rng);
    targets.shuffle(rng);
    let linked = rng.random_range(0..=source_len.min(target_len));
    let links = AlignmentLinkSet::new(
        source_len,
        target_len,
        sources.into_iter().zip(targets).take(linked),
    )
    .expect("in bounds");
    (
        TokenizedSentence::from_words(&src),
        TokenizedSentence::from_words(&tgt),
        links,
    )
}
