//! Next-event evaluation: HR@K and NDCG@K with bootstrap intervals,
//! pair-frequency buckets, side-information ablation lifts and the shifted
//! PMI diagnostic.

use alloc::collections::BTreeMap;
use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec;
use alloc::vec::Vec;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::cooc::CoCountMatrix;
use crate::corpus::{EncodedSession, SplitCorpus, Vocabulary};
use crate::error::{Error, Result};
use crate::pairgen::{KindSet, PairKind};
use crate::scorer::Scorer;

/// 1-based rank of `target` among the first `k` entries, if present.
pub fn rank_of(ranked: &[u32], target: u32, k: usize) -> Option<usize> {
    ranked.iter().take(k).position(|&x| x == target).map(|p| p + 1)
}

/// `1/K` on a hit within the first `k`, else 0.
pub fn hit_ratio_at_k(ranked: &[u32], target: u32, k: usize) -> f64 {
    hr_from_rank(rank_of(ranked, target, k), k)
}

/// `1/log2(rank + 1)` for a hit within the first `k`, else 0.
pub fn ndcg_at_k(ranked: &[u32], target: u32, k: usize) -> f64 {
    ndcg_from_rank(rank_of(ranked, target, k), k)
}

pub fn hr_from_rank(rank: Option<usize>, k: usize) -> f64 {
    match rank {
        Some(r) if r <= k => 1.0 / k as f64,
        _ => 0.0,
    }
}

pub fn ndcg_from_rank(rank: Option<usize>, k: usize) -> f64 {
    match rank {
        Some(r) if r <= k => 1.0 / libm::log2(r as f64 + 1.0),
        _ => 0.0,
    }
}

/// One evaluable user: query item, target item (`None` when the target is
/// not a known item and can never be hit) and the training co-occurrence
/// count of the pair.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct EvalCase {
    pub query: usize,
    pub target: Option<usize>,
    pub pair_freq: u64,
}

/// Outcome of ranking one user's candidates.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct UserOutcome {
    pub rank: Option<usize>,
    pub pair_freq: u64,
}

/// Builds evaluation cases for the split's phase. Users whose query is not a
/// known item are skipped; the second value counts them.
pub fn eval_cases(split: &SplitCorpus, vocab: &Vocabulary, cooc: &CoCountMatrix) -> (Vec<EvalCase>, usize) {
    let mut cases = Vec::with_capacity(split.sessions.len());
    let mut skipped = 0;
    for s in &split.sessions {
        let query = match vocab.index_of(s.query()) {
            Some(q) if vocab.is_item(q) => q,
            _ => {
                skipped += 1;
                continue;
            }
        };
        let target = vocab.index_of(s.target(split.phase)).filter(|&t| vocab.is_item(t));
        let pair_freq = target.map_or(0, |t| cooc.count(query, t));
        cases.push(EvalCase {
            query,
            target,
            pair_freq,
        });
    }
    (cases, skipped)
}

/// Ranks one case, looking `max_k` deep.
pub fn score_case(scorer: &dyn Scorer, case: &EvalCase, max_k: usize) -> Result<UserOutcome> {
    let top = scorer.top_k(case.query, max_k)?;
    let rank = case
        .target
        .and_then(|t| top.iter().position(|&(c, _)| c as usize == t))
        .map(|p| p + 1);
    Ok(UserOutcome {
        rank,
        pair_freq: case.pair_freq,
    })
}

/// Half-open pair-frequency ranges `[0, e1), [e1, e2), ..., [en, ∞)`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Buckets {
    edges: Vec<u64>,
}

impl Buckets {
    /// `edges` must be strictly increasing and positive.
    pub fn new(edges: Vec<u64>) -> Result<Self> {
        if edges.first() == Some(&0) || edges.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::InvalidParameter(format!(
                "bucket edges must be positive and strictly increasing, got {edges:?}"
            )));
        }
        Ok(Buckets { edges })
    }

    pub fn edges(&self) -> &[u64] {
        &self.edges
    }

    pub fn len(&self) -> usize {
        self.edges.len() + 1
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn bucket_of(&self, freq: u64) -> usize {
        self.edges.partition_point(|&e| e <= freq)
    }

    /// `[lo, hi)` of bucket `b`, `hi = None` for the open-ended last bucket.
    pub fn range(&self, b: usize) -> (u64, Option<u64>) {
        let lo = if b == 0 { 0 } else { self.edges[b - 1] };
        (lo, self.edges.get(b).copied())
    }
}

impl Default for Buckets {
    /// `{0}`, `{1, 2}`, `{3, ...}`.
    fn default() -> Self {
        Buckets { edges: vec![1, 3] }
    }
}

/// Evaluation settings.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct EvalConfig {
    pub k_list: Vec<usize>,
    pub bootstrap_samples: usize,
    pub confidence: f64,
    pub seed: u64,
    pub buckets: Buckets,
}

impl Default for EvalConfig {
    fn default() -> Self {
        EvalConfig {
            k_list: vec![10, 20],
            bootstrap_samples: 1000,
            confidence: 0.9,
            seed: 1,
            buckets: Buckets::default(),
        }
    }
}

impl EvalConfig {
    pub fn validate(&self) -> Result<()> {
        if self.k_list.is_empty() || self.k_list.contains(&0) {
            return Err(Error::InvalidParameter("K list must be non-empty with K >= 1".into()));
        }
        if !(self.confidence > 0.0 && self.confidence < 1.0) {
            return Err(Error::InvalidParameter("confidence level must be in (0, 1)".into()));
        }
        Ok(())
    }

    pub fn max_k(&self) -> usize {
        self.k_list.iter().copied().max().unwrap_or(1)
    }
}

/// Point estimate with a confidence interval.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Estimate {
    pub est: f64,
    pub lo: f64,
    pub hi: f64,
}

/// Per-bucket breakdown.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BucketReport {
    /// Inclusive lower pair frequency.
    pub lo: u64,
    /// Exclusive upper pair frequency, `null` when unbounded.
    pub hi: Option<u64>,
    pub users: usize,
    /// Empty when the bucket has no users.
    pub metrics: BTreeMap<String, f64>,
}

/// Result of evaluating one method.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub method: String,
    pub metrics: BTreeMap<String, Estimate>,
    pub buckets: Vec<BucketReport>,
    pub evaluated: usize,
    pub skipped: usize,
}

impl EvalReport {
    pub fn get(&self, metric: &str) -> Option<f64> {
        self.metrics.get(metric).map(|e| e.est)
    }

    pub fn hr(&self, k: usize) -> Option<f64> {
        self.get(&hr_label(k))
    }

    pub fn ndcg(&self, k: usize) -> Option<f64> {
        self.get(&ndcg_label(k))
    }

    /// HR@`k` within the bucket containing pair frequency `freq`.
    pub fn bucket_hr(&self, freq: u64, k: usize) -> Option<f64> {
        self.buckets
            .iter()
            .find(|b| freq >= b.lo && b.hi.is_none_or(|h| freq < h))
            .and_then(|b| b.metrics.get(&hr_label(k)).copied())
    }
}

pub fn hr_label(k: usize) -> String {
    format!("HR@{k}")
}

pub fn ndcg_label(k: usize) -> String {
    format!("NDCG@{k}")
}

/// Linear-interpolation quantile of sorted data.
fn quantile(sorted: &[f64], q: f64) -> f64 {
    let pos = q * (sorted.len() - 1) as f64;
    let lo = libm::floor(pos) as usize;
    let hi = libm::ceil(pos) as usize;
    let frac = pos - lo as f64;
    sorted[lo] + (sorted[hi] - sorted[lo]) * frac
}

/// Percentile-bootstrap interval of the mean of `values`, resampling with
/// the precomputed index sets.
fn bootstrap_interval(values: &[f64], resamples: &[Vec<u32>], level: f64) -> (f64, f64) {
    if resamples.is_empty() {
        let m = mean(values);
        return (m, m);
    }
    let mut means: Vec<f64> = resamples
        .iter()
        .map(|idx| compensated_sum(idx.iter().map(|&i| values[i as usize])) / idx.len() as f64)
        .collect();
    means.sort_unstable_by(f64::total_cmp);
    let tail = (1.0 - level) / 2.0;
    (quantile(&means, tail), quantile(&means, 1.0 - tail))
}

fn mean(values: &[f64]) -> f64 {
    compensated_sum(values.iter().copied()) / values.len() as f64
}

/// Neumaier summation: exact enough that n copies of x average back to x.
fn compensated_sum(values: impl Iterator<Item = f64>) -> f64 {
    let (mut sum, mut comp) = (0.0f64, 0.0f64);
    for v in values {
        let t = sum + v;
        if sum.abs() >= v.abs() {
            comp += (sum - t) + v;
        } else {
            comp += (v - t) + sum;
        }
        sum = t;
    }
    sum + comp
}

/// Turns per-user outcomes into a report.
///
/// Bootstrap resample indices depend only on `config.seed` and the number of
/// users, so the report does not depend on how outcomes were computed.
pub fn aggregate(method: &str, outcomes: &[UserOutcome], skipped: usize, config: &EvalConfig) -> Result<EvalReport> {
    config.validate()?;
    if outcomes.is_empty() {
        return Err(Error::NoEvaluableUsers);
    }
    let n = outcomes.len();
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let resamples: Vec<Vec<u32>> = (0..config.bootstrap_samples)
        .map(|_| (0..n).map(|_| rng.random_range(0..n as u32)).collect())
        .collect();

    let mut metrics = BTreeMap::new();
    let mut columns: Vec<(String, Vec<f64>)> = Vec::new();
    for &k in &config.k_list {
        columns.push((hr_label(k), outcomes.iter().map(|o| hr_from_rank(o.rank, k)).collect()));
        columns.push((
            ndcg_label(k),
            outcomes.iter().map(|o| ndcg_from_rank(o.rank, k)).collect(),
        ));
    }
    for (label, values) in &columns {
        let est = mean(values);
        let (lo, hi) = bootstrap_interval(values, &resamples, config.confidence);
        // percentile intervals need not cover the estimate; widen if they miss
        metrics.insert(
            label.clone(),
            Estimate {
                est,
                lo: lo.min(est),
                hi: hi.max(est),
            },
        );
    }

    let buckets = (0..config.buckets.len())
        .map(|b| {
            let members: Vec<usize> = (0..n)
                .filter(|&u| config.buckets.bucket_of(outcomes[u].pair_freq) == b)
                .collect();
            let mut bucket_metrics = BTreeMap::new();
            if !members.is_empty() {
                for (label, values) in &columns {
                    let m = compensated_sum(members.iter().map(|&u| values[u])) / members.len() as f64;
                    bucket_metrics.insert(label.clone(), m);
                }
            }
            let (lo, hi) = config.buckets.range(b);
            BucketReport {
                lo,
                hi,
                users: members.len(),
                metrics: bucket_metrics,
            }
        })
        .collect();

    Ok(EvalReport {
        method: method.to_string(),
        metrics,
        buckets,
        evaluated: n,
        skipped,
    })
}

/// Sequential evaluation of `scorer` on prepared cases.
pub fn evaluate(scorer: &dyn Scorer, cases: &[EvalCase], skipped: usize, config: &EvalConfig) -> Result<EvalReport> {
    config.validate()?;
    let max_k = config.max_k();
    let outcomes = cases
        .iter()
        .map(|c| score_case(scorer, c, max_k))
        .collect::<Result<Vec<_>>>()?;
    aggregate(scorer.name(), &outcomes, skipped, config)
}

/// HR@`k` per pair-frequency bucket as `(lo, hi, users, HR)`; `HR` is `None`
/// for empty buckets.
pub fn cold_start_report(report: &EvalReport, k: usize) -> Vec<(u64, Option<u64>, usize, Option<f64>)> {
    let label = hr_label(k);
    report
        .buckets
        .iter()
        .map(|b| (b.lo, b.hi, b.users, b.metrics.get(&label).copied()))
        .collect()
}

/// Side-information configurations compared in the ablation.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Ablation {
    OnlyIM,
    OnlyMI,
    OnlyJM,
    WithoutMM,
    Full,
}

impl Ablation {
    pub const ALL: [Ablation; 5] = [
        Ablation::OnlyIM,
        Ablation::OnlyMI,
        Ablation::OnlyJM,
        Ablation::WithoutMM,
        Ablation::Full,
    ];

    pub fn kinds(self) -> KindSet {
        match self {
            Ablation::OnlyIM => KindSet::of(&[PairKind::JI, PairKind::IM]),
            Ablation::OnlyMI => KindSet::of(&[PairKind::JI, PairKind::MI]),
            Ablation::OnlyJM => KindSet::of(&[PairKind::JI, PairKind::JM]),
            Ablation::WithoutMM => KindSet::ALL.without(PairKind::MM),
            Ablation::Full => KindSet::ALL,
        }
    }

    pub fn label(self) -> &'static str {
        match self {
            Ablation::OnlyIM => "only I|M",
            Ablation::OnlyMI => "only M|I",
            Ablation::OnlyJM => "only J|M",
            Ablation::WithoutMM => "all but M|M",
            Ablation::Full => "full",
        }
    }
}

/// One row of the lift table.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LiftRow {
    pub config: Ablation,
    pub hr: f64,
    pub ndcg: f64,
    /// `(HR - HR_BestOf) / (HR_full - HR_BestOf)`; `None` when the full model
    /// does not improve on the baseline.
    pub hr_lift: Option<f64>,
    pub ndcg_lift: Option<f64>,
}

/// Runs every ablation configuration through `run` (which trains and returns
/// `(HR, NDCG)` at the reporting cutoff) and normalizes against `baseline`.
pub fn ablation_run<F>(baseline: (f64, f64), mut run: F) -> Result<Vec<LiftRow>>
where
    F: FnMut(Ablation) -> Result<(f64, f64)>,
{
    let results = Ablation::ALL
        .iter()
        .map(|&a| run(a).map(|r| (a, r)))
        .collect::<Result<Vec<_>>>()?;
    let (full_hr, full_ndcg) = results[Ablation::ALL.len() - 1].1;
    let lift = |value: f64, base: f64, full: f64| {
        let denom = full - base;
        (denom != 0.0).then(|| (value - base) / denom)
    };
    Ok(results
        .into_iter()
        .map(|(config, (hr, ndcg))| {
            let (hr_lift, ndcg_lift) = if config == Ablation::Full {
                (Some(1.0), Some(1.0))
            } else {
                (lift(hr, baseline.0, full_hr), lift(ndcg, baseline.1, full_ndcg))
            };
            LiftRow {
                config,
                hr,
                ndcg,
                hr_lift,
                ndcg_lift,
            }
        })
        .collect())
}

/// Shifted PMI of windowed token co-occurrences, stored for `X_ij > 0`.
#[derive(Debug, Clone, PartialEq)]
pub struct SpmiMatrix {
    entries: BTreeMap<(u32, u32), f64>,
    shift: u64,
    total_pairs: u64,
}

impl SpmiMatrix {
    pub fn get(&self, i: u32, j: u32) -> Option<f64> {
        self.entries.get(&(i, j)).copied()
    }

    pub fn entries(&self) -> &BTreeMap<(u32, u32), f64> {
        &self.entries
    }

    pub fn shift(&self) -> u64 {
        self.shift
    }

    /// `|D|`, the number of ordered pairs.
    pub fn total_pairs(&self) -> u64 {
        self.total_pairs
    }
}

/// `SPMI_ij = log(X_ij |D| / (X_i X_j)) - log k`.
///
/// `X_ij` counts ordered position pairs at distance `1..=window` (same-token
/// pairs included), `X_i = Σ_j X_ij` and `|D| = Σ_ij X_ij`.
pub fn compute_spmi(sessions: &[EncodedSession], window: usize, shift_k: u64) -> Result<SpmiMatrix> {
    if window == 0 || shift_k == 0 {
        return Err(Error::InvalidParameter("window and shift k must be >= 1".into()));
    }
    let mut joint: BTreeMap<(u32, u32), u64> = BTreeMap::new();
    let mut marginal: BTreeMap<u32, u64> = BTreeMap::new();
    let mut total = 0u64;
    for s in sessions {
        let items = &s.items;
        for (p, &i) in items.iter().enumerate() {
            for &j in items.iter().skip(p + 1).take(window) {
                *joint.entry((i, j)).or_default() += 1;
                *joint.entry((j, i)).or_default() += 1;
                *marginal.entry(i).or_default() += 1;
                *marginal.entry(j).or_default() += 1;
                total += 2;
            }
        }
    }
    let log_shift = libm::log(shift_k as f64);
    let entries = joint
        .into_iter()
        .map(|((i, j), x)| {
            let pmi = libm::log(x as f64 * total as f64 / (marginal[&i] as f64 * marginal[&j] as f64));
            ((i, j), pmi - log_shift)
        })
        .collect();
    Ok(SpmiMatrix {
        entries,
        shift: shift_k,
        total_pairs: total,
    })
}
