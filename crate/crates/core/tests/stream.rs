use causal_simt_core::stream::{asr_sim_stream, AsrSimConfig, TimedTranscript, TimedWord};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn random_transcript(rng: &mut impl Rng) -> TimedTranscript {
    let n = rng.random_range(0..=30);
    let mut end = 0;
    let words = (0..n)
        .map(|i| {
            end += rng.random_range(1..=700);
            TimedWord {
                w: format!("w{i}"),
                end_ms: end,
            }
        })
        .collect();
    TimedTranscript {
        words,
        total_ms: end + rng.random_range(0..=500),
        reference: None,
    }
}

#[test]
fn windowed_exposure_invariants() {
    let mut rng = ChaCha8Rng::seed_from_u64(21);
    for _ in 0..2000 {
        let t = random_transcript(&mut rng);
        let exposed: Vec<_> = asr_sim_stream(t.clone(), AsrSimConfig::default())
            .unwrap()
            .collect();
        assert_eq!(exposed.len(), t.words.len());
        let mut prev = 0;
        for (w, timed) in exposed.iter().zip(&t.words) {
            assert_eq!(w.word, timed.w);
            assert!(
                w.stamp >= timed.end_ms,
                "{} exposed at {} before {}",
                w.word,
                w.stamp,
                timed.end_ms
            );
            assert_eq!(w.stamp % 200, 0);
            assert!(w.stamp >= prev);
            // never later than the first window covering the whole audio
            assert!(w.stamp < t.total_ms + 200);
            prev = w.stamp;
        }
    }
}

#[test]
fn last_visible_word_is_held_back() {
    let mut rng = ChaCha8Rng::seed_from_u64(22);
    for _ in 0..500 {
        let t = random_transcript(&mut rng);
        let exposed: Vec<_> = asr_sim_stream(t.clone(), AsrSimConfig::default())
            .unwrap()
            .collect();
        for (i, w) in exposed.iter().enumerate() {
            if w.stamp < t.total_ms {
                // a later word had already ended when this one was shown
                let next = t.words.get(i + 1).expect("held-back word exists");
                assert!(next.end_ms <= w.stamp);
            }
        }
    }
}
