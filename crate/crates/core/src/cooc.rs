//! Windowed item co-occurrence counts for the collaborative-filtering
//! baseline and for pair-frequency bucketing.

use alloc::vec;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::corpus::EncodedSession;

/// How two items are compared from their co-occurrence counts.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum CoSimilarity {
    /// `X_ij / sqrt(X_i X_j)` with `X_i` the item's occurrence count: the
    /// cosine of the items' binary occurrence vectors when each item occurs
    /// at most once per window.
    #[default]
    PairCosine,
    /// Cosine between the two items' co-occurrence rows (second-order).
    RowCosine,
}

/// Symmetric sparse item×item matrix without diagonal.
#[derive(Debug, Clone, PartialEq)]
pub struct CoCountMatrix {
    // rows[i] sorted by column
    rows: Vec<Vec<(u32, u32)>>,
    occurrences: Vec<u64>,
    norms: Vec<f64>,
    window: usize,
}

impl CoCountMatrix {
    /// Counts every unordered pair of positions at distance `1..=window`
    /// holding different items, once into `(i, j)` and once into `(j, i)`.
    /// Indices `>= n_items` are ignored.
    pub fn build(sessions: &[EncodedSession], n_items: usize, window: usize) -> Self {
        let mut neighbours: Vec<Vec<u32>> = vec![Vec::new(); n_items];
        let mut occurrences = vec![0u64; n_items];
        for s in sessions {
            let items = &s.items;
            for (p, &i) in items.iter().enumerate() {
                if (i as usize) >= n_items {
                    continue;
                }
                occurrences[i as usize] += 1;
                for &j in items.iter().skip(p + 1).take(window) {
                    if i != j && (j as usize) < n_items {
                        neighbours[i as usize].push(j);
                        neighbours[j as usize].push(i);
                    }
                }
            }
        }
        let rows: Vec<Vec<(u32, u32)>> = neighbours
            .into_iter()
            .map(|mut cols| {
                cols.sort_unstable();
                let mut row: Vec<(u32, u32)> = Vec::new();
                for c in cols {
                    match row.last_mut() {
                        Some((last, n)) if *last == c => *n += 1,
                        _ => row.push((c, 1)),
                    }
                }
                row.shrink_to_fit();
                row
            })
            .collect();
        let norms = rows
            .iter()
            .map(|r| libm::sqrt(r.iter().map(|&(_, c)| (c as f64) * (c as f64)).sum()))
            .collect();
        CoCountMatrix {
            rows,
            occurrences,
            norms,
            window,
        }
    }

    pub fn n_items(&self) -> usize {
        self.rows.len()
    }

    pub fn window(&self) -> usize {
        self.window
    }

    pub fn row(&self, i: usize) -> &[(u32, u32)] {
        &self.rows[i]
    }

    pub fn norm(&self, i: usize) -> f64 {
        self.norms[i]
    }

    pub fn occurrences(&self, i: usize) -> u64 {
        self.occurrences[i]
    }

    /// `X_ij`; zero for out-of-range indices.
    pub fn count(&self, i: usize, j: usize) -> u64 {
        if i >= self.rows.len() {
            return 0;
        }
        let row = &self.rows[i];
        row.binary_search_by_key(&(j as u32), |&(c, _)| c)
            .map(|k| row[k].1 as u64)
            .unwrap_or(0)
    }

    /// Similarity of two items under `mode`, in `[0, 1]`.
    pub fn similarity(&self, i: usize, j: usize, mode: CoSimilarity) -> f64 {
        match mode {
            CoSimilarity::RowCosine => {
                let (ni, nj) = (self.norms[i], self.norms[j]);
                if ni == 0.0 || nj == 0.0 {
                    return 0.0;
                }
                sparse_dot(&self.rows[i], &self.rows[j]) / (ni * nj)
            }
            CoSimilarity::PairCosine => {
                let denom = (self.occurrences[i] as f64) * (self.occurrences[j] as f64);
                if denom == 0.0 {
                    return 0.0;
                }
                self.count(i, j) as f64 / libm::sqrt(denom)
            }
        }
    }

    /// Every item with nonzero similarity to `query` (query itself included
    /// when applicable), with its similarity. Unordered.
    pub fn nonzero_similarities(&self, query: usize, mode: CoSimilarity) -> Vec<(u32, f64)> {
        match mode {
            CoSimilarity::RowCosine => {
                let nq = self.norms[query];
                if nq == 0.0 {
                    return Vec::new();
                }
                // row_q · row_m = Σ_n X_qn X_nm, accumulated over two hops
                let mut acc: alloc::collections::BTreeMap<u32, f64> = Default::default();
                for &(n, c_qn) in &self.rows[query] {
                    for &(m, c_nm) in &self.rows[n as usize] {
                        *acc.entry(m).or_default() += c_qn as f64 * c_nm as f64;
                    }
                }
                acc.into_iter()
                    .map(|(m, d)| (m, d / (nq * self.norms[m as usize])))
                    .collect()
            }
            CoSimilarity::PairCosine => self.rows[query]
                .iter()
                .map(|&(j, _)| (j, self.similarity(query, j as usize, mode)))
                .collect(),
        }
    }
}

fn sparse_dot(a: &[(u32, u32)], b: &[(u32, u32)]) -> f64 {
    let (mut x, mut y, mut acc) = (0, 0, 0.0);
    while x < a.len() && y < b.len() {
        match a[x].0.cmp(&b[y].0) {
            core::cmp::Ordering::Less => x += 1,
            core::cmp::Ordering::Greater => y += 1,
            core::cmp::Ordering::Equal => {
                acc += a[x].1 as f64 * b[y].1 as f64;
                x += 1;
                y += 1;
            }
        }
    }
    acc
}
