//! Independent oracles for the numerical building blocks.

use std::collections::HashMap;

mod support;
use support::*;

use mp2v_core::cooc::{CoCountMatrix, CoSimilarity};
use mp2v_core::corpus::EncodedSession;
use mp2v_core::metrics::{compute_spmi, hit_ratio_at_k, ndcg_at_k};
use mp2v_core::model::{pair_loss, sgns_step, Scratch};
use mp2v_core::pairgen::{count_pairs, generate_pairs, KindSet, PairKind};
use mp2v_core::scorer::{select_top, BestOf, CoCounts, EmbeddingScorer, Scorer};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

#[test]
fn analytic_gradient_matches_finite_differences() {
    for seed in 0..100 {
        let err = gradient_check(seed);
        assert!(err < 1e-5, "seed {seed}: relative error {err}");
    }
}

#[test]
fn pair_loss_matches_reference_formula() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    for _ in 0..50 {
        let (model, w_in, w_out) = random_model(&mut rng, 4, 3);
        let (pair, negatives) = random_case(&mut rng, 4);
        let got = pair_loss(&model, &pair, &negatives).unwrap();
        let want = reference_loss(&w_in, &w_out, pair.input as usize, pair.output as usize, &negatives);
        assert!((got - want).abs() < 1e-12, "{got} vs {want}");
    }
}

#[test]
fn step_descends_on_fixture_models() {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    for _ in 0..100 {
        let (mut model, _, _) = random_model(&mut rng, 6, 4);
        let (pair, negatives) = random_case(&mut rng, 6);
        let before = pair_loss(&model, &pair, &negatives).unwrap();
        sgns_step(&mut model, &pair, &negatives, 1e-3, 1.0, &mut Scratch::default()).unwrap();
        assert!(pair_loss(&model, &pair, &negatives).unwrap() < before);
    }
}

#[test]
fn pair_generation_matches_brute_force() {
    let subsets = [
        KindSet::ALL,
        KindSet::PROD2VEC,
        KindSet::of(&[PairKind::JI, PairKind::IM]),
        KindSet::ALL.without(PairKind::MM),
    ];
    let bad = pair_generation_mismatches(&subsets);
    assert!(bad.is_empty(), "{bad:?}");
}

#[test]
fn pair_counts_follow_the_context_formula() {
    for seq in all_sequences(3, 5) {
        let meta: Vec<Option<u32>> = seq.iter().map(|&i| Some(3 + i % 2)).collect();
        let session = EncodedSession::with_single_attribute(seq.clone(), meta);
        for window in 1..=2 {
            let n = seq.len();
            let contexts: usize = (0..n)
                .map(|i| (0..n).filter(|&j| j != i && i.abs_diff(j) <= window).count())
                .sum();
            let pairs = generate_pairs(&session, window, KindSet::ALL);
            for kind in [PairKind::JI, PairKind::JM, PairKind::MI, PairKind::MM] {
                assert_eq!(pairs.iter().filter(|p| p.kind == kind).count(), contexts);
            }
            assert_eq!(pairs.iter().filter(|p| p.kind == PairKind::IM).count(), n);
            assert_eq!(count_pairs(&session, window, KindSet::ALL), pairs.len() as u64);
        }
    }
}

#[test]
fn prod2vec_pairs_are_classic_skip_gram() {
    let seq = vec![0, 1, 2, 1, 0, 2];
    let session = EncodedSession::from_items(seq.clone());
    for window in 1..4 {
        let got: Vec<(u32, u32)> = generate_pairs(&session, window, KindSet::PROD2VEC)
            .iter()
            .map(|p| (p.input, p.output))
            .collect();
        let mut want = Vec::new();
        for (i, &c) in seq.iter().enumerate() {
            for (j, &o) in seq.iter().enumerate() {
                if i != j && i.abs_diff(j) <= window {
                    want.push((c, o));
                }
            }
        }
        assert_eq!(got, want);
    }
}

#[test]
fn sampler_matches_power_law() {
    let freqs: Vec<u64> = (1..=100).map(|i| (i * i) as u64 % 97 + 1).collect();
    assert!(sampler_deviation(&freqs, 0.75, 1_000_000, 1) < 0.01);
}

fn brute_force_counts(sessions: &[Vec<u32>], window: usize) -> HashMap<(u32, u32), u64> {
    let mut counts = HashMap::new();
    for s in sessions {
        for p in 0..s.len() {
            for q in 0..s.len() {
                if p != q && p.abs_diff(q) <= window && s[p] != s[q] {
                    *counts.entry((s[p], s[q])).or_insert(0) += 1;
                }
            }
        }
    }
    // every unordered position pair was seen from both ends
    counts
}

fn random_corpus(seed: u64, sessions: usize, n_items: u32) -> Vec<Vec<u32>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..sessions)
        .map(|_| {
            let len = rng.random_range(1..12);
            (0..len).map(|_| rng.random_range(0..n_items)).collect()
        })
        .collect()
}

#[test]
fn cocounts_match_brute_force() {
    let corpus = random_corpus(3, 50, 20);
    let encoded: Vec<EncodedSession> = corpus.iter().cloned().map(EncodedSession::from_items).collect();
    for window in 1..=3 {
        let m = CoCountMatrix::build(&encoded, 20, window);
        let want = brute_force_counts(&corpus, window);
        for i in 0..20 {
            for j in 0..20 {
                assert_eq!(m.count(i, j), *want.get(&(i as u32, j as u32)).unwrap_or(&0));
                for mode in [CoSimilarity::PairCosine, CoSimilarity::RowCosine] {
                    assert_eq!(m.similarity(i, j, mode), m.similarity(j, i, mode));
                }
            }
        }
    }
}

#[test]
fn spmi_matches_brute_force() {
    // four tokens
    let corpus = vec![vec![0u32, 1, 2, 3, 0, 1], vec![2, 2, 3, 1], vec![3, 0]];
    let (err, exact) = spmi_error(&corpus, 2, 1).unwrap();
    assert!(err < 1e-12 && exact);
    let (err, exact) = spmi_error(&corpus, 2, 5).unwrap();
    assert!(err < 1e-12 && !exact);
}

#[test]
fn pmi_is_zero_at_independence() {
    // X_ij = 2 for every (i, j) in {0,1}², so X_ij |D| = 2·8 = X_i X_j = 4·4
    let s: Vec<EncodedSession> = [[0, 1], [0, 1], [0, 0], [1, 1]]
        .iter()
        .map(|p| EncodedSession::from_items(p.to_vec()))
        .collect();
    let spmi = compute_spmi(&s, 1, 1).unwrap();
    assert_eq!(spmi.entries().len(), 4);
    for v in spmi.entries().values() {
        assert_eq!(*v, 0.0);
    }
}

#[test]
fn metric_closed_forms() {
    let ranked = [7u32, 3, 9, 1, 4];
    assert_eq!(hit_ratio_at_k(&ranked, 9, 3), 1.0 / 3.0);
    assert_eq!(ndcg_at_k(&ranked, 9, 3), 0.5);
    assert_eq!(ndcg_at_k(&ranked, 1, 3), 0.0);
}

fn exhaustive(scorer: &dyn Scorer, query: usize) -> Vec<(u32, f64)> {
    let scored = (0..scorer.n_items())
        .filter(|&c| c != query)
        .map(|c| (c as u32, scorer.score(query, c)))
        .collect::<Vec<_>>();
    select_top(scored.clone(), scored.len())
}

#[test]
fn top_k_is_prefix_of_exhaustive_ranking() {
    let corpus = random_corpus(9, 200, 300);
    let encoded: Vec<EncodedSession> = corpus.iter().cloned().map(EncodedSession::from_items).collect();
    let m = CoCountMatrix::build(&encoded, 300, 3);
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let (model, _, _) = random_model(&mut rng, 320, 8);
    let emb = EmbeddingScorer::new("emb", &model, 300);
    let freq: Vec<u64> = (0..300).map(|i| m.occurrences(i)).collect();
    let best = BestOf::new(&freq, 320);
    let pair = CoCounts::new(&m, CoSimilarity::PairCosine, 320);
    let row = CoCounts::new(&m, CoSimilarity::RowCosine, 320);
    let scorers: [&dyn Scorer; 4] = [&emb, &best, &pair, &row];
    for scorer in scorers {
        for query in [0usize, 17, 150, 299] {
            let full = exhaustive(scorer, query);
            for k in [1, 5, 20, 299, 500] {
                let top = scorer.top_k(query, k).unwrap();
                assert_eq!(top.len(), k.min(299));
                assert_eq!(&full[..top.len()], &top[..], "{} q={query} k={k}", scorer.name());
                assert!(top.windows(2).all(|w| w[0].1 >= w[1].1));
            }
        }
        // metadata rows may be queried but are never recommended
        let top = scorer.top_k(310, 400).unwrap();
        assert!(top.iter().all(|&(c, _)| c < 300));
    }
}
