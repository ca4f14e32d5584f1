use causal_simt_core::causal::{causal_align, CausalPair, FILLER, WAIT};
use causal_simt_core::sft::{collate, emit_samples, trim_pair, SftConfig};
use causal_simt_core::synthetic::permuted_pair;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Independent causality check over the aligned output only.
fn rescan(p: &CausalPair) -> Result<(), String> {
    if p.source_words.len() != p.target_words.len() {
        return Err("length mismatch".into());
    }
    let first_filler = p.source_words.iter().position(|w| w == FILLER);
    if let Some(f) = first_filler {
        if p.source_words[f..].iter().any(|w| w != FILLER) {
            return Err("fillers are not a suffix".into());
        }
    }
    if p.target_words.iter().filter(|w| *w == WAIT).count() != p.wait_count {
        return Err("wait count".into());
    }
    // position of the j-th real target word
    let positions: Vec<usize> = p
        .target_words
        .iter()
        .enumerate()
        .filter(|(_, w)| *w != WAIT)
        .map(|(i, _)| i)
        .collect();
    for &(i, j) in &p.links {
        let pos = *positions.get(j).ok_or("link past target")?;
        if pos < i {
            return Err(format!("target {j} at {pos} precedes source {i}"));
        }
    }
    Ok(())
}

#[test]
fn fuzzed_pairs_are_causal() {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    for _ in 0..2000 {
        let (s, t, l) = {
            let sl = rng.random_range(1..=20);
            let tl = rng.random_range(1..=20);
            permuted_pair(&mut rng, sl, tl)
        };
        let p = causal_align(&s, &t, &l);
        rescan(&p).unwrap();
        assert_eq!(p.original_source(), s.words);
        assert_eq!(p.original_target(), t.words);
        // padding goes to one side only
        assert!(p.filler_count == 0 || p.target_words.last().map(String::as_str) != Some(WAIT));
    }
}

/// Fewest WAITs before each target word that satisfies every link, found by
/// trying all non-decreasing shift vectors.
fn brute_force_shifts(constraint: &[Option<usize>], max_shift: usize) -> Vec<usize> {
    fn go(
        j: usize,
        prev: usize,
        c: &[Option<usize>],
        max: usize,
        cur: &mut Vec<usize>,
        best: &mut Option<Vec<usize>>,
    ) {
        if j == c.len() {
            let better = match best {
                None => true,
                Some(b) => cur.iter().sum::<usize>() < b.iter().sum::<usize>(),
            };
            if better {
                *best = Some(cur.clone());
            }
            return;
        }
        for shift in prev..=max {
            if c[j].is_some_and(|ci| j + shift < ci) {
                continue;
            }
            cur.push(shift);
            go(j + 1, shift, c, max, cur, best);
            cur.pop();
        }
    }
    let mut best = None;
    go(0, 0, constraint, max_shift, &mut Vec::new(), &mut best);
    best.expect("shift = max_shift always works")
}

#[test]
fn greedy_insertion_is_minimal() {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    for _ in 0..400 {
        let sl = rng.random_range(1..=6);
        let tl = rng.random_range(1..=6);
        let (s, t, l) = permuted_pair(&mut rng, sl, tl);
        let p = causal_align(&s, &t, &l);
        let shifts: Vec<usize> = p
            .target_words
            .iter()
            .enumerate()
            .filter(|(_, w)| *w != WAIT)
            .enumerate()
            .map(|(j, (pos, _))| pos - j)
            .collect();
        let mut constraint = vec![None; tl];
        for &(i, j) in &l.links {
            constraint[j] = Some(i);
        }
        assert_eq!(shifts, brute_force_shifts(&constraint, sl), "{l:?}");
    }
}

#[test]
fn trim_length_is_uniform() {
    let pair = CausalPair {
        source_words: vec!["a".into(), "b".into(), "c".into(), "d".into()],
        target_words: vec!["w".into(), "x".into(), "y".into(), "z".into()],
        wait_count: 0,
        filler_count: 0,
        links: vec![],
    };
    let corpus = [pair];
    let mut cfg = SftConfig::new("German");
    cfg.samples_per_pair = 10_000;
    cfg.seed = 2024;
    let mut counts = [0usize; 4];
    for s in emit_samples(&corpus, &cfg).unwrap() {
        counts[s.meta.trim_len - 1] += 1;
    }
    let expected = 2500.0;
    let chi2: f64 = counts
        .iter()
        .map(|&c| (c as f64 - expected).powi(2) / expected)
        .sum();
    // 3 degrees of freedom, p = 0.001
    assert!(chi2 < 16.27, "chi2 {chi2} for {counts:?}");
    let sigma = (10_000.0f64 * 0.25 * 0.75).sqrt();
    for c in counts {
        assert!((c as f64 - expected).abs() < 3.0 * sigma, "{counts:?}");
    }
}

#[test]
fn samples_never_carry_interior_waits_or_fillers() {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    for _ in 0..300 {
        let sl = rng.random_range(1..=12);
        let tl = rng.random_range(1..=12);
        let (s, t, l) = permuted_pair(&mut rng, sl, tl);
        let p = causal_align(&s, &t, &l);
        for len in 1..=p.aligned_len() {
            let (src, tgt) = trim_pair(&p, len).unwrap();
            assert!(!src.iter().any(|w| w == FILLER));
            if let Some((_, body)) = tgt.split_last() {
                assert!(!body.iter().any(|w| w == WAIT));
            }
        }
    }
}

#[test]
fn rendered_sample_matches_golden() {
    let pair = CausalPair {
        source_words: vec!["I".into(), "like".into(), "tea".into()],
        target_words: vec!["Ich".into(), WAIT.into(), "Tee".into()],
        wait_count: 1,
        filler_count: 0,
        links: vec![(0, 0), (2, 1)],
    };
    let s = collate(0, 0, &pair, 2, &SftConfig::new("German")).unwrap();
    let golden = include_str!("fixtures/sft_prompt_golden.txt");
    assert_eq!(format!("{}{}", s.prompt, s.completion), golden);
    assert_eq!(&golden[s.meta.loss_mask_boundary..], "Ich <WAIT>");
}
