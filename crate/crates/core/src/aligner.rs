//! Lexical word alignment.
//!
//! Translation tables are trained with IBM Model 1 EM (uniform start, a
//! position-less NULL source word). [`align_pair`] takes the per-target argmax
//! of the forward table and the per-source argmax of the reverse table and
//! keeps their intersection.
//!
//! Alignments produced elsewhere can be loaded in Pharaoh format (`i-j` pairs,
//! one line per sentence pair) with [`import_alignments`].

use std::collections::{BTreeSet, HashMap};
use std::fmt::Write as _;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::tokenizer::TokenizedSentence;

pub const DEFAULT_ITERATIONS: usize = 15;

/// Which side of the corpus plays the conditioning ("source") role.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Direction {
    /// p(target word | source word)
    Forward,
    /// p(source word | target word)
    Reverse,
}

/// Id 0 of the conditioning vocabulary.
const NULL_ID: usize = 0;

#[derive(Debug, Clone)]
pub struct TranslationTable {
    direction: Direction,
    /// Conditioning vocabulary, index 0 is NULL.
    given_vocab: Vec<String>,
    given_index: HashMap<String, usize>,
    emitted_vocab: Vec<String>,
    emitted_index: HashMap<String, usize>,
    /// `row_offsets[e]..row_offsets[e + 1]` indexes `emitted`/`probs` for row `e`.
    row_offsets: Vec<usize>,
    emitted: Vec<usize>,
    probs: Vec<f64>,
    iterations_run: usize,
    log_likelihood_history: Vec<f64>,
}

impl TranslationTable {
    pub fn direction(&self) -> Direction {
        self.direction
    }

    pub fn iterations_run(&self) -> usize {
        self.iterations_run
    }

    /// Corpus log-likelihood under the parameters entering each iteration.
    pub fn log_likelihood_history(&self) -> &[f64] {
        &self.log_likelihood_history
    }

    /// Words of the conditioning side, NULL excluded.
    pub fn source_vocab(&self) -> &[String] {
        &self.given_vocab[1..]
    }

    pub fn target_vocab(&self) -> &[String] {
        &self.emitted_vocab
    }

    /// p(emitted | given). `given = None` is the NULL word. Unseen pairs and
    /// out-of-vocabulary words have probability zero.
    pub fn prob(&self, given: Option<&str>, emitted: &str) -> f64 {
        let e = match given {
            None => NULL_ID,
            Some(w) => match self.given_index.get(w) {
                Some(&e) => e,
                None => return 0.0,
            },
        };
        let Some(&f) = self.emitted_index.get(emitted) else {
            return 0.0;
        };
        self.prob_ids(e, f)
    }

    fn prob_ids(&self, e: usize, f: usize) -> f64 {
        let range = self.row_offsets[e]..self.row_offsets[e + 1];
        match self.emitted[range.clone()].binary_search(&f) {
            Ok(k) => self.probs[range.start + k],
            Err(_) => 0.0,
        }
    }

    /// Non-zero entries of one row, `None` selecting the NULL row.
    pub fn row(&self, given: Option<&str>) -> Vec<(&str, f64)> {
        let e = match given {
            None => NULL_ID,
            Some(w) => match self.given_index.get(w) {
                Some(&e) => e,
                None => return Vec::new(),
            },
        };
        let range = self.row_offsets[e]..self.row_offsets[e + 1];
        range
            .map(|k| (self.emitted_vocab[self.emitted[k]].as_str(), self.probs[k]))
            .collect()
    }

    /// Sum of every non-empty row, NULL row first.
    pub fn row_sums(&self) -> Vec<f64> {
        (0..self.given_vocab.len())
            .filter(|&e| self.row_offsets[e] < self.row_offsets[e + 1])
            .map(|e| {
                self.probs[self.row_offsets[e]..self.row_offsets[e + 1]]
                    .iter()
                    .sum()
            })
            .collect()
    }
}

/// Per-pair word ids and, for every (given position, emitted position), the
/// slot of that entry in the flat probability array.
struct PairSlots {
    given_len: usize,
    emitted_len: usize,
    slots: Vec<usize>,
}

pub fn train_table(
    corpus: &[(TokenizedSentence, TokenizedSentence)],
    iterations: usize,
    direction: Direction,
) -> Result<TranslationTable> {
    if corpus.is_empty() {
        return Err(Error::EmptyCorpus);
    }
    if iterations == 0 {
        return Err(Error::InvalidArgument(
            "iterations must be at least 1".into(),
        ));
    }

    let sides = |pair: &(TokenizedSentence, TokenizedSentence)| -> (Vec<String>, Vec<String>) {
        match direction {
            Direction::Forward => (pair.0.words.clone(), pair.1.words.clone()),
            Direction::Reverse => (pair.1.words.clone(), pair.0.words.clone()),
        }
    };

    let mut given_vocab = vec!["<NULL>".to_string()];
    let mut given_index: HashMap<String, usize> = HashMap::new();
    let mut emitted_vocab = Vec::new();
    let mut emitted_index: HashMap<String, usize> = HashMap::new();
    let mut encoded = Vec::with_capacity(corpus.len());
    for pair in corpus {
        let (given, emitted) = sides(pair);
        let mut g_ids = vec![NULL_ID];
        for w in given {
            let next = given_vocab.len();
            let id = *given_index.entry(w.clone()).or_insert(next);
            if id == next {
                given_vocab.push(w);
            }
            g_ids.push(id);
        }
        let mut f_ids = Vec::new();
        for w in emitted {
            let next = emitted_vocab.len();
            let id = *emitted_index.entry(w.clone()).or_insert(next);
            if id == next {
                emitted_vocab.push(w);
            }
            f_ids.push(id);
        }
        encoded.push((g_ids, f_ids));
    }

    // co-occurrence rows, sorted by emitted id
    let mut cooc: Vec<BTreeSet<usize>> = vec![BTreeSet::new(); given_vocab.len()];
    for (g_ids, f_ids) in &encoded {
        for &e in g_ids {
            cooc[e].extend(f_ids.iter().copied());
        }
    }
    let mut row_offsets = Vec::with_capacity(given_vocab.len() + 1);
    let mut emitted = Vec::new();
    row_offsets.push(0);
    for row in &cooc {
        emitted.extend(row.iter().copied());
        row_offsets.push(emitted.len());
    }
    let slot_of = |e: usize, f: usize| -> usize {
        let range = row_offsets[e]..row_offsets[e + 1];
        range.start
            + emitted[range]
                .binary_search(&f)
                .expect("co-occurring entry")
    };
    let pairs: Vec<PairSlots> = encoded
        .iter()
        .map(|(g_ids, f_ids)| PairSlots {
            given_len: g_ids.len(),
            emitted_len: f_ids.len(),
            slots: g_ids
                .iter()
                .flat_map(|&e| f_ids.iter().map(move |&f| (e, f)))
                .map(|(e, f)| slot_of(e, f))
                .collect(),
        })
        .collect();

    let uniform = if emitted_vocab.is_empty() {
        0.0
    } else {
        1.0 / emitted_vocab.len() as f64
    };
    let mut probs = vec![uniform; emitted.len()];
    let mut counts = vec![0.0; emitted.len()];
    let mut history = Vec::with_capacity(iterations);

    for _ in 0..iterations {
        counts.iter_mut().for_each(|c| *c = 0.0);
        let mut log_likelihood = 0.0;
        for pair in &pairs {
            let norm = (pair.given_len as f64).ln();
            for j in 0..pair.emitted_len {
                let z: f64 = (0..pair.given_len)
                    .map(|i| probs[pair.slots[i * pair.emitted_len + j]])
                    .sum();
                log_likelihood += z.ln() - norm;
                for i in 0..pair.given_len {
                    let slot = pair.slots[i * pair.emitted_len + j];
                    counts[slot] += probs[slot] / z;
                }
            }
        }
        history.push(log_likelihood);

        for e in 0..given_vocab.len() {
            let range = row_offsets[e]..row_offsets[e + 1];
            let total: f64 = counts[range.clone()].iter().sum();
            if total > 0.0 {
                for k in range {
                    probs[k] = counts[k] / total;
                }
            }
        }
    }

    Ok(TranslationTable {
        direction,
        given_vocab,
        given_index,
        emitted_vocab,
        emitted_index,
        row_offsets,
        emitted,
        probs,
        iterations_run: iterations,
        log_likelihood_history: history,
    })
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AlignmentLinkSet {
    pub links: BTreeSet<(usize, usize)>,
    pub source_len: usize,
    pub target_len: usize,
}

impl AlignmentLinkSet {
    pub fn empty(source_len: usize, target_len: usize) -> Self {
        AlignmentLinkSet {
            links: BTreeSet::new(),
            source_len,
            target_len,
        }
    }

    pub fn new(
        source_len: usize,
        target_len: usize,
        links: impl IntoIterator<Item = (usize, usize)>,
    ) -> Result<Self> {
        let mut set = Self::empty(source_len, target_len);
        for (i, j) in links {
            if i >= source_len || j >= target_len {
                return Err(Error::Bounds {
                    line: 0,
                    source_index: i,
                    target_index: j,
                    source_len,
                    target_len,
                });
            }
            set.links.insert((i, j));
        }
        Ok(set)
    }

    pub fn len(&self) -> usize {
        self.links.len()
    }

    pub fn is_empty(&self) -> bool {
        self.links.is_empty()
    }

    /// True when every target index occurs in at most one link.
    pub fn is_target_functional(&self) -> bool {
        let mut seen = BTreeSet::new();
        self.links.iter().all(|&(_, j)| seen.insert(j))
    }

    /// Source indices linked to target word `j`.
    pub fn sources_of(&self, j: usize) -> impl Iterator<Item = usize> + '_ {
        self.links.iter().filter(move |l| l.1 == j).map(|l| l.0)
    }

    pub fn to_pharaoh(&self) -> String {
        let mut out = String::new();
        for (k, (i, j)) in self.links.iter().enumerate() {
            if k > 0 {
                out.push(' ');
            }
            let _ = write!(out, "{i}-{j}");
        }
        out
    }
}

/// Argmax over real positions, lowest index on ties. The link is kept only
/// when the best real word is at least as likely as NULL and non-zero.
fn best_position<'a>(
    candidates: impl Iterator<Item = &'a str>,
    score: impl Fn(Option<&str>) -> f64,
) -> Option<usize> {
    let mut best: Option<(usize, f64)> = None;
    for (i, w) in candidates.enumerate() {
        let p = score(Some(w));
        if best.is_none_or(|(_, bp)| p > bp) {
            best = Some((i, p));
        }
    }
    let (i, p) = best?;
    (p > 0.0 && p >= score(None)).then_some(i)
}

pub fn align_pair(
    src: &TokenizedSentence,
    tgt: &TokenizedSentence,
    forward: &TranslationTable,
    reverse: &TranslationTable,
) -> AlignmentLinkSet {
    debug_assert_eq!(forward.direction(), Direction::Forward);
    debug_assert_eq!(reverse.direction(), Direction::Reverse);

    let mut forward_links = BTreeSet::new();
    for (j, t) in tgt.words.iter().enumerate() {
        if let Some(i) = best_position(src.words.iter().map(String::as_str), |s| forward.prob(s, t))
        {
            forward_links.insert((i, j));
        }
    }
    let mut links = BTreeSet::new();
    for (i, s) in src.words.iter().enumerate() {
        if let Some(j) = best_position(tgt.words.iter().map(String::as_str), |t| reverse.prob(t, s))
        {
            if forward_links.contains(&(i, j)) {
                links.insert((i, j));
            }
        }
    }
    AlignmentLinkSet {
        links,
        source_len: src.len(),
        target_len: tgt.len(),
    }
}

/// Parses one Pharaoh line. `line_no` is 1-based and only used in errors.
pub fn parse_pharaoh_line(
    line: &str,
    line_no: usize,
    source_len: usize,
    target_len: usize,
    path: &Path,
) -> Result<AlignmentLinkSet> {
    let mut set = AlignmentLinkSet::empty(source_len, target_len);
    for token in line.split_whitespace() {
        let parsed = token
            .split_once('-')
            .and_then(|(i, j)| Some((i.parse::<usize>().ok()?, j.parse::<usize>().ok()?)));
        let Some((i, j)) = parsed else {
            return Err(Error::Parse {
                path: path.to_path_buf(),
                line: line_no,
                message: format!("malformed link {token:?}, expected i-j"),
            });
        };
        if i >= source_len || j >= target_len {
            return Err(Error::Bounds {
                line: line_no,
                source_index: i,
                target_index: j,
                source_len,
                target_len,
            });
        }
        set.links.insert((i, j));
    }
    Ok(set)
}

/// Reads a Pharaoh file and validates every link against the companion
/// corpus, which must have one pair per line.
pub fn import_alignments(
    path: &Path,
    corpus: &[(TokenizedSentence, TokenizedSentence)],
) -> Result<Vec<AlignmentLinkSet>> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let lines: Vec<&str> = text.lines().collect();
    if lines.len() != corpus.len() {
        return Err(Error::InputMismatch(format!(
            "{} has {} alignment lines for {} sentence pairs",
            path.display(),
            lines.len(),
            corpus.len()
        )));
    }
    lines
        .iter()
        .zip(corpus)
        .enumerate()
        .map(|(k, (line, (s, t)))| parse_pharaoh_line(line, k + 1, s.len(), t.len(), path))
        .collect()
}

pub fn export_alignments(path: &Path, sets: &[AlignmentLinkSet]) -> Result<()> {
    let mut out = String::new();
    for set in sets {
        out.push_str(&set.to_pharaoh());
        out.push('\n');
    }
    std::fs::write(path, out).map_err(|e| Error::io(path, e))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::tokenizer::TokenizedSentence as TS;

    fn pair(s: &str, t: &str) -> (TS, TS) {
        let split = |x: &str| TS::from_words(&x.split(' ').collect::<Vec<_>>());
        (split(s), split(t))
    }

    fn toy() -> Vec<(TS, TS)> {
        vec![pair("the dog", "le chien"), pair("the cat", "le chat")]
    }

    // Expected values computed by an independent hand-written EM script over
    // the same two pairs (10 iterations, NULL included, uniform start).
    #[test]
    fn two_pair_corpus_matches_reference_em() {
        let forward = train_table(&toy(), 10, Direction::Forward).unwrap();
        assert!((forward.prob(Some("the"), "le") - 0.9036886221911258).abs() < 1e-12);
        assert!((forward.prob(Some("dog"), "chien") - 0.982003652902086).abs() < 1e-12);
        assert!((forward.prob(Some("dog"), "le") - 0.017996347097914003).abs() < 1e-12);
        let history = forward.log_likelihood_history();
        assert_eq!(history.len(), 10);
        assert!((history[0] - -4.394449154672439).abs() < 1e-12);
        assert!((history[9] - -3.054885827260212).abs() < 1e-12);

        let row = forward.row(Some("the"));
        let (best, _) = row
            .iter()
            .copied()
            .fold(("", f64::MIN), |acc, x| if x.1 > acc.1 { x } else { acc });
        assert_eq!(best, "le");

        let reverse = train_table(&toy(), 10, Direction::Reverse).unwrap();
        assert!((reverse.prob(Some("le"), "the") - 0.9036886221911258).abs() < 1e-12);
        assert!((reverse.prob(Some("chien"), "dog") - 0.982003652902086).abs() < 1e-12);
    }

    #[test]
    fn single_candidate_takes_all_mass() {
        let t = train_table(&[pair("a", "b")], 1, Direction::Forward).unwrap();
        assert_eq!(t.prob(Some("a"), "b"), 1.0);
        assert_eq!(t.row(Some("a")), vec![("b", 1.0)]);
    }

    #[test]
    fn more_iterations_never_lower_likelihood() {
        let one = train_table(&toy(), 1, Direction::Forward).unwrap();
        let two = train_table(&toy(), 2, Direction::Forward).unwrap();
        let ll = |t: &TranslationTable| *t.log_likelihood_history().last().unwrap();
        assert!(ll(&two) >= ll(&one));
    }

    #[test]
    fn empty_corpus_is_rejected() {
        assert!(matches!(
            train_table(&[], 5, Direction::Forward),
            Err(Error::EmptyCorpus)
        ));
    }

    #[test]
    fn aligns_toy_pair_monotonically() {
        let f = train_table(&toy(), 10, Direction::Forward).unwrap();
        let r = train_table(&toy(), 10, Direction::Reverse).unwrap();
        let (s, t) = pair("the dog", "le chien");
        let links = align_pair(&s, &t, &f, &r);
        assert_eq!(links.links, BTreeSet::from([(0, 0), (1, 1)]));
    }

    #[test]
    fn out_of_vocabulary_pair_has_no_links() {
        let f = train_table(&toy(), 10, Direction::Forward).unwrap();
        let r = train_table(&toy(), 10, Direction::Reverse).unwrap();
        let (s, t) = pair("zebra runs", "quux blah");
        assert!(align_pair(&s, &t, &f, &r).is_empty());
    }

    #[test]
    fn one_by_one_pair_links() {
        let corpus = vec![pair("x", "y"), pair("x z", "y w")];
        let f = train_table(&corpus, 10, Direction::Forward).unwrap();
        let r = train_table(&corpus, 10, Direction::Reverse).unwrap();
        let (s, t) = pair("x", "y");
        assert_eq!(align_pair(&s, &t, &f, &r).links, BTreeSet::from([(0, 0)]));
    }

    #[test]
    fn pharaoh_lines() {
        let p = Path::new("mem");
        let set = parse_pharaoh_line("0-0 1-1", 1, 2, 2, p).unwrap();
        assert_eq!(set.links, BTreeSet::from([(0, 0), (1, 1)]));
        assert_eq!(set.to_pharaoh(), "0-0 1-1");
        assert!(parse_pharaoh_line("", 1, 2, 2, p).unwrap().is_empty());
        assert!(matches!(
            parse_pharaoh_line("3-0", 4, 2, 2, p),
            Err(Error::Bounds { line: 4, .. })
        ));
        assert!(matches!(
            parse_pharaoh_line("0-0 1x1", 7, 2, 2, p),
            Err(Error::Parse { line: 7, .. })
        ));
    }
}
