//! Synthetic session corpora with a known category structure.
//!
//! Items belong to latent categories; within a session the category follows a
//! Markov chain (stay with probability `stay`, otherwise move to the next
//! category) and items are drawn from a Zipf law inside their category. With
//! probability `noise` a position instead shows an item of a uniformly random
//! category, leaving the chain untouched.
//!
//! The last two items of a session (validation and test) follow the chain
//! without noise. In a `cold_fraction` share of sessions they are instead
//! drawn uniformly from their category among items that never co-occurred
//! with the query, so the evaluated (query, target) pair has zero windowed
//! co-occurrence in the corresponding training prefixes.

use std::collections::HashSet;

use mp2v_core::corpus::{MetadataMap, Session};
use rand::distr::Distribution;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::Zipf;

use crate::error::Result;

pub const CATEGORY_ATTRIBUTE: &str = "category";

#[derive(Debug, Clone, PartialEq)]
pub struct SyntheticSpec {
    pub sessions: usize,
    pub categories: usize,
    pub items_per_category: usize,
    pub min_len: usize,
    pub max_len: usize,
    pub stay: f64,
    pub zipf_exponent: f64,
    pub noise: f64,
    /// Share of sessions whose evaluated pairs are held out.
    pub cold_fraction: f64,
    /// Co-occurrence window used for the cold hold-out.
    pub window: usize,
    pub seed: u64,
}

impl Default for SyntheticSpec {
    fn default() -> Self {
        SyntheticSpec {
            sessions: 10_000,
            categories: 20,
            items_per_category: 150,
            min_len: 5,
            max_len: 12,
            stay: 0.8,
            zipf_exponent: 1.0,
            noise: 0.7,
            cold_fraction: 0.5,
            window: 3,
            seed: 1,
        }
    }
}

#[derive(Debug, Clone)]
pub struct SyntheticCorpus {
    pub sessions: Vec<Session>,
    /// `(item, category)` for every item of the catalogue.
    pub categories: Vec<(String, String)>,
}

impl SyntheticCorpus {
    pub fn metadata(&self) -> MetadataMap {
        let mut m = MetadataMap::new(CATEGORY_ATTRIBUTE).expect("valid attribute name");
        for (item, cat) in &self.categories {
            m.insert(item, cat).expect("one category per item");
        }
        m
    }
}

fn item_token(id: usize) -> String {
    format!("i{id}")
}

struct Catalogue<'a> {
    spec: &'a SyntheticSpec,
    zipf: Zipf<f64>,
}

impl Catalogue<'_> {
    fn category(&self, item: usize) -> usize {
        item / self.spec.items_per_category
    }

    fn next_category<R: Rng>(&self, cat: usize, rng: &mut R) -> usize {
        if rng.random::<f64>() < self.spec.stay {
            cat
        } else {
            (cat + 1) % self.spec.categories
        }
    }

    fn draw<R: Rng>(&self, cat: usize, rng: &mut R) -> usize {
        let rank = self.zipf.sample(rng) as usize;
        cat * self.spec.items_per_category + rank.clamp(1, self.spec.items_per_category) - 1
    }

    /// Uniform item of `cat` that never co-occurred with `query`.
    fn draw_cold<R: Rng>(&self, cat: usize, query: usize, seen: &HashSet<(usize, usize)>, rng: &mut R) -> usize {
        let n = self.spec.items_per_category;
        let mut candidate = cat * n;
        for _ in 0..1000 {
            candidate = cat * n + rng.random_range(0..n);
            if candidate != query && !seen.contains(&key(query, candidate)) {
                break;
            }
        }
        candidate
    }
}

fn key(a: usize, b: usize) -> (usize, usize) {
    (a.min(b), a.max(b))
}

fn add_pairs(seen: &mut HashSet<(usize, usize)>, seq: &[usize], from: usize, window: usize) {
    for p in from..seq.len() {
        for q in p.saturating_sub(window)..p {
            if seq[p] != seq[q] {
                seen.insert(key(seq[p], seq[q]));
            }
        }
    }
}

pub fn generate(spec: &SyntheticSpec) -> Result<SyntheticCorpus> {
    let bad = |m: &str| crate::Error::Config(format!("synthetic corpus: {m}"));
    if spec.categories == 0 || spec.items_per_category == 0 || spec.sessions == 0 {
        return Err(bad("sizes must be positive"));
    }
    if [spec.stay, spec.noise, spec.cold_fraction]
        .iter()
        .any(|p| !(0.0..=1.0).contains(p))
    {
        return Err(bad("stay, noise and cold_fraction must lie in [0, 1]"));
    }
    if spec.min_len < 3 || spec.max_len < spec.min_len {
        return Err(bad("session lengths must satisfy 3 <= min_len <= max_len"));
    }
    let zipf = Zipf::new(spec.items_per_category as f64, spec.zipf_exponent).map_err(|e| bad(&e.to_string()))?;
    let cat = Catalogue { spec, zipf };
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);

    let mut seqs: Vec<Vec<usize>> = Vec::with_capacity(spec.sessions);
    let mut cats: Vec<usize> = Vec::with_capacity(spec.sessions);
    for _ in 0..spec.sessions {
        let len = rng.random_range(spec.min_len..=spec.max_len);
        let mut c = rng.random_range(0..spec.categories);
        let mut seq = Vec::with_capacity(len);
        for p in 0..len - 2 {
            if p > 0 {
                c = cat.next_category(c, &mut rng);
            }
            let shown = if rng.random::<f64>() < spec.noise {
                rng.random_range(0..spec.categories)
            } else {
                c
            };
            seq.push(cat.draw(shown, &mut rng));
        }
        seqs.push(seq);
        cats.push(c);
    }

    let cold: Vec<bool> = (0..seqs.len())
        .map(|_| rng.random::<f64>() < spec.cold_fraction)
        .collect();
    let mut seen = HashSet::new();
    for s in &seqs {
        add_pairs(&mut seen, s, 0, spec.window);
    }
    for round in 0..2 {
        let mut appended = Vec::with_capacity(seqs.len());
        for ((s, c), &cold) in seqs.iter().zip(cats.iter_mut()).zip(&cold) {
            let query = *s.last().expect("non-empty");
            *c = cat.next_category(cat.category(query), &mut rng);
            appended.push(if cold {
                cat.draw_cold(*c, query, &seen, &mut rng)
            } else {
                cat.draw(*c, &mut rng)
            });
        }
        for (s, item) in seqs.iter_mut().zip(appended) {
            s.push(item);
            if round == 0 {
                let from = s.len() - 1;
                add_pairs(&mut seen, s, from, spec.window);
            }
        }
    }

    let sessions = seqs
        .into_iter()
        .enumerate()
        .map(|(u, seq)| Session::new(format!("u{u}"), seq.into_iter().map(item_token).collect()))
        .collect();
    let categories = (0..spec.categories * spec.items_per_category)
        .map(|i| (item_token(i), format!("c{}", i / spec.items_per_category)))
        .collect();
    Ok(SyntheticCorpus { sessions, categories })
}
