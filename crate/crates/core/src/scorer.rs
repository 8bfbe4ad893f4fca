//! Next-item scorers sharing one `score` / `top_k` interface.
//!
//! Candidates are always item tokens other than the query; rankings sort by
//! descending score with ties broken by ascending vocabulary index.

use alloc::collections::BTreeMap;
use alloc::string::String;
use alloc::vec::Vec;
use core::cmp::Ordering;

use crate::cooc::{CoCountMatrix, CoSimilarity};
use crate::error::{Error, Result};
use crate::model::{EmbeddingModel, Real};

/// `u·v / (‖u‖‖v‖)`, or 0 when either norm is 0.
pub fn cosine(u: &[f64], v: &[f64]) -> Result<f64> {
    if u.len() != v.len() {
        return Err(Error::DimensionMismatch {
            left: u.len(),
            right: v.len(),
        });
    }
    let (mut uv, mut uu, mut vv) = (0.0, 0.0, 0.0);
    for (a, b) in u.iter().zip(v) {
        uv += a * b;
        uu += a * a;
        vv += b * b;
    }
    if uu == 0.0 || vv == 0.0 {
        return Ok(0.0);
    }
    Ok((uv / (libm::sqrt(uu) * libm::sqrt(vv))).clamp(-1.0, 1.0))
}

/// Ranking order: higher score first, then lower index.
#[inline]
pub fn rank_order(a: &(u32, f64), b: &(u32, f64)) -> Ordering {
    b.1.total_cmp(&a.1).then(a.0.cmp(&b.0))
}

/// Keeps the best `k` entries of `scored` in ranking order.
pub fn select_top(mut scored: Vec<(u32, f64)>, k: usize) -> Vec<(u32, f64)> {
    if k == 0 {
        return Vec::new();
    }
    if scored.len() > k {
        scored.select_nth_unstable_by(k - 1, rank_order);
        scored.truncate(k);
    }
    scored.sort_unstable_by(rank_order);
    scored
}

/// Anything that can rank candidate items for a query token.
pub trait Scorer: Sync {
    fn name(&self) -> &str;

    /// Number of vocabulary entries a query may refer to.
    fn vocab_len(&self) -> usize;

    /// Item candidates are indices `0..n_items`.
    fn n_items(&self) -> usize;

    fn score(&self, query: usize, candidate: usize) -> f64;

    /// Best `k` candidates; the default scores every candidate.
    fn top_k(&self, query: usize, k: usize) -> Result<Vec<(u32, f64)>> {
        self.check_query(query, k)?;
        let scored = (0..self.n_items())
            .filter(|&c| c != query)
            .map(|c| (c as u32, self.score(query, c)))
            .collect();
        Ok(select_top(scored, k))
    }

    fn check_query(&self, query: usize, k: usize) -> Result<()> {
        if query >= self.vocab_len() {
            return Err(Error::IndexOutOfRange {
                index: query,
                len: self.vocab_len(),
            });
        }
        if k == 0 {
            return Err(Error::InvalidParameter("K must be >= 1".into()));
        }
        Ok(())
    }
}

/// Popularity baseline: ignores the query and ranks items by training frequency.
#[derive(Debug, Clone)]
pub struct BestOf {
    vocab_len: usize,
    scores: Vec<f64>,
    ranked: Vec<u32>,
}

impl BestOf {
    /// `frequencies[i]` is the training count of item `i`; `vocab_len` covers
    /// any metadata tokens following the items.
    pub fn new(frequencies: &[u64], vocab_len: usize) -> Self {
        let max = frequencies.iter().copied().max().unwrap_or(0).max(1) as f64;
        let scores: Vec<f64> = frequencies.iter().map(|&f| f as f64 / max).collect();
        let mut ranked: Vec<(u32, f64)> = scores.iter().enumerate().map(|(i, &s)| (i as u32, s)).collect();
        ranked.sort_unstable_by(rank_order);
        BestOf {
            vocab_len: vocab_len.max(scores.len()),
            scores,
            ranked: ranked.into_iter().map(|(i, _)| i).collect(),
        }
    }
}

impl Scorer for BestOf {
    fn name(&self) -> &str {
        "BestOf"
    }

    fn vocab_len(&self) -> usize {
        self.vocab_len
    }

    fn n_items(&self) -> usize {
        self.scores.len()
    }

    fn score(&self, _query: usize, candidate: usize) -> f64 {
        self.scores[candidate]
    }

    fn top_k(&self, query: usize, k: usize) -> Result<Vec<(u32, f64)>> {
        self.check_query(query, k)?;
        Ok(self
            .ranked
            .iter()
            .filter(|&&i| i as usize != query)
            .take(k)
            .map(|&i| (i, self.scores[i as usize]))
            .collect())
    }
}

/// Collaborative-filtering baseline over windowed co-occurrence counts.
#[derive(Debug, Clone)]
pub struct CoCounts<'a> {
    matrix: &'a CoCountMatrix,
    mode: CoSimilarity,
    vocab_len: usize,
}

impl<'a> CoCounts<'a> {
    /// `vocab_len` may exceed the item count when metadata tokens follow the items.
    pub fn new(matrix: &'a CoCountMatrix, mode: CoSimilarity, vocab_len: usize) -> Self {
        CoCounts {
            matrix,
            mode,
            vocab_len: vocab_len.max(matrix.n_items()),
        }
    }
}

impl Scorer for CoCounts<'_> {
    fn name(&self) -> &str {
        "CoCounts"
    }

    fn vocab_len(&self) -> usize {
        self.vocab_len
    }

    fn n_items(&self) -> usize {
        self.matrix.n_items()
    }

    fn score(&self, query: usize, candidate: usize) -> f64 {
        if query >= self.matrix.n_items() {
            return 0.0;
        }
        self.matrix.similarity(query, candidate, self.mode)
    }

    fn top_k(&self, query: usize, k: usize) -> Result<Vec<(u32, f64)>> {
        self.check_query(query, k)?;
        let n = self.matrix.n_items();
        let nonzero: Vec<(u32, f64)> = if query < n {
            self.matrix
                .nonzero_similarities(query, self.mode)
                .into_iter()
                .filter(|&(c, s)| c as usize != query && s != 0.0)
                .collect()
        } else {
            Vec::new()
        };
        let mut top = select_top(nonzero, k);
        if top.len() < k {
            // the remaining candidates all score 0
            let mut seen: Vec<u32> = top.iter().map(|x| x.0).collect();
            seen.sort_unstable();
            let fill = (0..n as u32)
                .filter(|&c| c as usize != query && seen.binary_search(&c).is_err())
                .take(k - top.len())
                .map(|c| (c, 0.0));
            top.extend(fill);
        }
        Ok(top)
    }
}

/// Cosine similarity of input vectors.
#[derive(Debug, Clone)]
pub struct EmbeddingScorer {
    name: String,
    dim: usize,
    n_items: usize,
    vectors: Vec<f64>,
    norms: Vec<f64>,
}

impl EmbeddingScorer {
    /// Rows `0..n_items` of the model's input table are the candidate items.
    pub fn new<F: Real>(name: impl Into<String>, model: &EmbeddingModel<F>, n_items: usize) -> Self {
        let dim = model.dim();
        let vectors: Vec<f64> = model.input_table().iter().map(|x| x.to_f64()).collect();
        let norms = vectors
            .chunks_exact(dim)
            .map(|r| libm::sqrt(r.iter().map(|x| x * x).sum()))
            .collect();
        EmbeddingScorer {
            name: name.into(),
            dim,
            n_items: n_items.min(model.rows()),
            vectors,
            norms,
        }
    }

    fn row(&self, i: usize) -> &[f64] {
        &self.vectors[i * self.dim..(i + 1) * self.dim]
    }
}

impl Scorer for EmbeddingScorer {
    fn name(&self) -> &str {
        &self.name
    }

    fn vocab_len(&self) -> usize {
        self.norms.len()
    }

    fn n_items(&self) -> usize {
        self.n_items
    }

    fn score(&self, query: usize, candidate: usize) -> f64 {
        let (nq, nc) = (self.norms[query], self.norms[candidate]);
        if nq == 0.0 || nc == 0.0 {
            return 0.0;
        }
        let dot: f64 = self
            .row(query)
            .iter()
            .zip(self.row(candidate))
            .map(|(a, b)| a * b)
            .sum();
        (dot / (nq * nc)).clamp(-1.0, 1.0)
    }
}

/// `alpha · A + (1 - alpha) · B`, blended over the union of both components'
/// top `pool` candidates.
pub struct Mix<'a> {
    name: String,
    alpha: f64,
    pool: usize,
    a: &'a dyn Scorer,
    b: &'a dyn Scorer,
}

impl<'a> Mix<'a> {
    pub fn new(name: impl Into<String>, alpha: f64, a: &'a dyn Scorer, b: &'a dyn Scorer, pool: usize) -> Result<Self> {
        if !(0.0..=1.0).contains(&alpha) {
            return Err(Error::InvalidParameter(alloc::format!("alpha {alpha} outside [0, 1]")));
        }
        if a.n_items() != b.n_items() {
            return Err(Error::DimensionMismatch {
                left: a.n_items(),
                right: b.n_items(),
            });
        }
        if pool == 0 {
            return Err(Error::InvalidParameter("candidate pool must be >= 1".into()));
        }
        Ok(Mix {
            name: name.into(),
            alpha,
            pool,
            a,
            b,
        })
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }
}

impl Scorer for Mix<'_> {
    fn name(&self) -> &str {
        &self.name
    }

    fn vocab_len(&self) -> usize {
        self.a.vocab_len().min(self.b.vocab_len())
    }

    fn n_items(&self) -> usize {
        self.a.n_items()
    }

    fn score(&self, query: usize, candidate: usize) -> f64 {
        self.alpha * self.a.score(query, candidate) + (1.0 - self.alpha) * self.b.score(query, candidate)
    }

    fn top_k(&self, query: usize, k: usize) -> Result<Vec<(u32, f64)>> {
        self.check_query(query, k)?;
        let mut pool: BTreeMap<u32, ()> = BTreeMap::new();
        for (c, _) in self.a.top_k(query, self.pool)? {
            pool.insert(c, ());
        }
        for (c, _) in self.b.top_k(query, self.pool)? {
            pool.insert(c, ());
        }
        let scored = pool.into_keys().map(|c| (c, self.score(query, c as usize))).collect();
        Ok(select_top(scored, k))
    }
}

/// Blended top-K of an embedding scorer and a co-count scorer.
pub fn mix_top_k(
    alpha: f64,
    embedding: &dyn Scorer,
    cocounts: &dyn Scorer,
    query: usize,
    k: usize,
    pool: usize,
) -> Result<Vec<(u32, f64)>> {
    Mix::new("Mix", alpha, embedding, cocounts, pool)?.top_k(query, k)
}
