use std::hint::black_box;

use causal_simt_core::aligner::{train_table, Direction};
use causal_simt_core::causal::causal_align;
use causal_simt_core::engine::{run_session, DictionaryBackend, SessionConfig};
use causal_simt_core::metrics::{corpus_bleu, sentence_latency, DelaySequence};
use causal_simt_core::prompt::PromptTemplate;
use causal_simt_core::stream::text_stream;
use causal_simt_core::synthetic::{cipher_corpus, permuted_pair};
use causal_simt_core::tokenizer::{tokenize, TokenizedSentence};
use criterion::{criterion_group, criterion_main, BatchSize, Criterion};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn em(c: &mut Criterion) {
    let corpus = cipher_corpus(200, 100, 3, 12, 1);
    c.bench_function("em_train_200_pairs_5_iters", |b| {
        b.iter(|| train_table(black_box(&corpus.pairs), 5, Direction::Forward).unwrap())
    });
}

fn causal(c: &mut Criterion) {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let pairs: Vec<_> = (0..100)
        .map(|_| {
            let (s, t) = (rng.random_range(5..=40), rng.random_range(5..=40));
            permuted_pair(&mut rng, s, t)
        })
        .collect();
    c.bench_function("causal_align_100_pairs", |b| {
        b.iter(|| {
            for (s, t, l) in &pairs {
                black_box(causal_align(s, t, l));
            }
        })
    });
}

fn tokenizer(c: &mut Criterion) {
    let text = "Mr. O'Neil said, \"We can't stay past 5:30 p.m.\" (and he's right), didn't he? "
        .repeat(20);
    c.bench_function("tokenize_paragraph", |b| {
        b.iter(|| tokenize(black_box(&text)).unwrap())
    });
}

fn session(c: &mut Criterion) {
    let words: Vec<String> = (0..30).map(|i| format!("w{i}")).collect();
    let src = TokenizedSentence::from_words(&words);
    let cfg = SessionConfig::new(3, PromptTemplate::interpreter("German", "<WAIT>"));
    c.bench_function("run_session_30_words_k3", |b| {
        b.iter_batched(
            || (text_stream(&src), DictionaryBackend::identity()),
            |(mut stream, mut backend)| run_session(&mut stream, &mut backend, &cfg).unwrap(),
            BatchSize::SmallInput,
        )
    });
}

fn metrics(c: &mut Criterion) {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let seqs: Vec<DelaySequence> = (0..1000)
        .map(|_| {
            let x = rng.random_range(1..=40u64);
            let mut g: Vec<u64> = (0..rng.random_range(1..=40))
                .map(|_| rng.random_range(1..=x))
                .collect();
            g.sort_unstable();
            DelaySequence::from_counts(&g, x, Some(g.len())).unwrap()
        })
        .collect();
    c.bench_function("latency_1000_sequences", |b| {
        b.iter(|| {
            for d in &seqs {
                black_box(sentence_latency(d).unwrap());
            }
        })
    });

    let refs: Vec<String> = (0..500)
        .map(|i| {
            (0..20)
                .map(|j| format!("w{}", (i * 13 + j * 7) % 97))
                .collect::<Vec<_>>()
                .join(" ")
        })
        .collect();
    let hyps: Vec<String> = refs.iter().map(|r| r.replacen("w1", "x1", 2)).collect();
    c.bench_function("corpus_bleu_500_sentences", |b| {
        b.iter(|| corpus_bleu(black_box(&hyps), black_box(&refs)).unwrap())
    });
}

criterion_group!(benches, em, causal, tokenizer, session, metrics);
criterion_main!(benches);
