//! Independent reference implementations shared by the oracle tests and the
//! acceptance target.
#![allow(dead_code)]

use std::collections::HashMap;

use mp2v_core::corpus::EncodedSession;
use mp2v_core::metrics::compute_spmi;
use mp2v_core::model::{sgns_step, EmbeddingModel, Scratch};
use mp2v_core::pairgen::{generate_pairs, KindSet, PairKind, TrainingPair};
use mp2v_core::sampler::NegativeSampler;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub type Table = Vec<Vec<f64>>;

fn ln_sigmoid(x: f64) -> f64 {
    -(1.0 + (-x).exp()).ln()
}

/// Straight transcription of the negative-sampling loss on nested vectors.
pub fn reference_loss(w_in: &Table, w_out: &Table, input: usize, output: usize, negatives: &[u32]) -> f64 {
    let dot = |a: &[f64], b: &[f64]| -> f64 { a.iter().zip(b).map(|(x, y)| x * y).sum() };
    let mut l = -ln_sigmoid(dot(&w_in[input], &w_out[output]));
    for &n in negatives {
        l -= ln_sigmoid(-dot(&w_in[input], &w_out[n as usize]));
    }
    l
}

pub fn random_model(rng: &mut ChaCha8Rng, rows: usize, dim: usize) -> (EmbeddingModel<f64>, Table, Table) {
    let w_in: Table = (0..rows)
        .map(|_| (0..dim).map(|_| rng.random_range(-1.0..1.0)).collect())
        .collect();
    let w_out: Table = (0..rows)
        .map(|_| (0..dim).map(|_| rng.random_range(-1.0..1.0)).collect())
        .collect();
    let model = EmbeddingModel::from_tables(
        rows,
        dim,
        w_in.iter().flatten().copied().collect(),
        w_out.iter().flatten().copied().collect(),
    )
    .unwrap();
    (model, w_in, w_out)
}

pub fn random_case(rng: &mut ChaCha8Rng, rows: usize) -> (TrainingPair, Vec<u32>) {
    let input = rng.random_range(0..rows as u32);
    let output = rng.random_range(0..rows as u32);
    let k = rng.random_range(1..=4);
    let negatives = (0..k)
        .map(|_| loop {
            let n = rng.random_range(0..rows as u32);
            if n != output {
                break n;
            }
        })
        .collect();
    (TrainingPair::new(input, output, PairKind::JI), negatives)
}

/// Max relative error between the update direction of `sgns_step` and
/// central finite differences of the reference loss.
pub fn gradient_check(seed: u64) -> f64 {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let rows = rng.random_range(2..=10);
    let dim = rng.random_range(1..=6);
    let (model, w_in, w_out) = random_model(&mut rng, rows, dim);
    let (pair, negatives) = random_case(&mut rng, rows);

    let mut stepped = model.clone();
    sgns_step(&mut stepped, &pair, &negatives, 1.0, 1.0, &mut Scratch::default()).unwrap();

    let eps = 1e-5;
    let mut worst = 0.0f64;
    for table in 0..2 {
        for r in 0..rows {
            for c in 0..dim {
                let (before, after) = if table == 0 {
                    (model.input_row(r)[c], stepped.input_row(r)[c])
                } else {
                    (model.output_row(r)[c], stepped.output_row(r)[c])
                };
                let analytic = before - after;
                let eval = |delta: f64| {
                    let (mut a, mut b) = (w_in.clone(), w_out.clone());
                    if table == 0 {
                        a[r][c] += delta;
                    } else {
                        b[r][c] += delta;
                    }
                    reference_loss(&a, &b, pair.input as usize, pair.output as usize, &negatives)
                };
                let numeric = (eval(eps) - eval(-eps)) / (2.0 * eps);
                let rel = (analytic - numeric).abs() / analytic.abs().max(numeric.abs()).max(1e-4);
                worst = worst.max(rel);
            }
        }
    }
    worst
}

/// Brute-force enumeration over every (target position, other position, kind).
pub fn brute_force_pairs(items: &[u32], meta: &[Option<u32>], window: usize, kinds: KindSet) -> Vec<TrainingPair> {
    let n = items.len();
    let mut out = Vec::new();
    for i in 0..n {
        for j in 0..n {
            let dist = i.abs_diff(j);
            for kind in PairKind::ALL {
                if !kinds.contains(kind) {
                    continue;
                }
                let pair = match kind {
                    PairKind::IM if i == j => meta[i].map(|m| (m, items[i])),
                    PairKind::IM => None,
                    _ if dist == 0 || dist > window => None,
                    PairKind::JI => Some((items[i], items[j])),
                    PairKind::JM => meta[i].map(|m| (m, items[j])),
                    PairKind::MI => meta[j].map(|m| (items[i], m)),
                    PairKind::MM => meta[i].zip(meta[j]),
                };
                if let Some((a, b)) = pair {
                    out.push(TrainingPair::new(a, b, kind));
                }
            }
        }
    }
    out
}

pub fn all_sequences(alphabet: u32, max_len: usize) -> Vec<Vec<u32>> {
    let mut all = Vec::new();
    let mut frontier = vec![Vec::new()];
    for _ in 0..max_len {
        let mut next = Vec::new();
        for seq in &frontier {
            for a in 0..alphabet {
                let mut s: Vec<u32> = seq.clone();
                s.push(a);
                next.push(s);
            }
        }
        all.extend(next.iter().cloned());
        frontier = next;
    }
    all
}

/// Sequences of length <= 5 over items {0, 1, 2} with metadata 3 (items 0
/// and 2) and 4 (item 1), windows 1 and 2: returns every case where the
/// generated multiset differs from the enumeration.
pub fn pair_generation_mismatches(kind_sets: &[KindSet]) -> Vec<String> {
    let meta_of = |i: u32| Some(if i == 1 { 4 } else { 3 });
    let mut bad = Vec::new();
    for seq in all_sequences(3, 5) {
        let meta: Vec<Option<u32>> = seq.iter().map(|&i| meta_of(i)).collect();
        let session = EncodedSession::with_single_attribute(seq.clone(), meta.clone());
        for window in 1..=2 {
            for &kinds in kind_sets {
                let mut got = generate_pairs(&session, window, kinds);
                let mut want = brute_force_pairs(&seq, &meta, window, kinds);
                got.sort();
                want.sort();
                if got != want {
                    bad.push(format!("{seq:?} w={window} {kinds:?}"));
                }
            }
        }
    }
    bad
}

/// Largest absolute gap between empirical and `freq^power` probabilities.
pub fn sampler_deviation(freqs: &[u64], power: f64, draws: usize, seed: u64) -> f64 {
    let s = NegativeSampler::new(freqs, power).unwrap();
    let weights: Vec<f64> = freqs.iter().map(|&f| (f as f64).powf(power)).collect();
    let total: f64 = weights.iter().sum();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut counts = vec![0usize; freqs.len()];
    for _ in 0..draws {
        counts[s.sample(&mut rng) as usize] += 1;
    }
    counts
        .iter()
        .zip(&weights)
        .map(|(&c, w)| (c as f64 / draws as f64 - w / total).abs())
        .fold(0.0, f64::max)
}

/// Windowed ordered position-pair counts, diagonal tokens included.
pub fn brute_force_token_pairs(corpus: &[Vec<u32>], window: usize) -> HashMap<(u32, u32), f64> {
    let mut x = HashMap::new();
    for s in corpus {
        for p in 0..s.len() {
            for q in 0..s.len() {
                if p != q && p.abs_diff(q) <= window {
                    *x.entry((s[p], s[q])).or_insert(0.0) += 1.0;
                }
            }
        }
    }
    x
}

/// Max |SPMI - (log(X_ij |D| / (X_i X_j)) - log k)| over the toy corpus, and
/// whether shift 1 reproduces PMI exactly. `None` if the supports differ.
pub fn spmi_error(corpus: &[Vec<u32>], window: usize, shift: u64) -> Option<(f64, bool)> {
    let x = brute_force_token_pairs(corpus, window);
    let d: f64 = x.values().sum();
    let xi = |i: u32| -> f64 { x.iter().filter(|((a, _), _)| *a == i).map(|(_, v)| v).sum() };
    let encoded: Vec<EncodedSession> = corpus.iter().cloned().map(EncodedSession::from_items).collect();
    let spmi = compute_spmi(&encoded, window, shift).unwrap();
    if spmi.entries().len() != x.len() || spmi.total_pairs() as f64 != d {
        return None;
    }
    let mut worst = 0.0f64;
    let mut exact = true;
    for (&(i, j), &xij) in &x {
        let pmi = (xij * d / (xi(i) * xi(j))).ln();
        let got = spmi.get(i, j)?;
        worst = worst.max((got - (pmi - (shift as f64).ln())).abs());
        exact &= got == pmi;
    }
    Some((worst, exact))
}
