//! Single-pass SGD over session pairs, weighting each pair kind by its λ.
//!
//! The pieces here are shared by the deterministic single-threaded [`train`]
//! and the multi-threaded driver in the companion crate: [`Trainer`] owns the
//! immutable context and hands out shuffled epoch orders, and
//! [`Trainer::run_sessions`] trains one shard on any [`Tables`] implementation.

use alloc::vec::Vec;
use core::sync::atomic::{AtomicU64, Ordering};

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::corpus::EncodedSession;
use crate::error::{Error, Result};
use crate::model::{sgns_step, EmbeddingModel, Scratch, Tables};
use crate::pairgen::{count_pairs, for_each_pair, KindSet, PairKind};
use crate::sampler::NegativeSampler;

/// Learning rate never decays below `base * MIN_RATE_FRACTION`.
pub const MIN_RATE_FRACTION: f64 = 1e-4;

const SHUFFLE_STREAM: u64 = 1;
const WORKER_STREAM_BASE: u64 = 2;

/// Side-information weights. The item→item term always has weight 1.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Lambdas {
    pub im: f64,
    pub jm: f64,
    pub mi: f64,
    pub mm: f64,
}

impl Lambdas {
    pub const fn uniform(lambda: f64) -> Self {
        Lambdas {
            im: lambda,
            jm: lambda,
            mi: lambda,
            mm: lambda,
        }
    }

    pub fn weight(&self, kind: PairKind) -> f64 {
        match kind {
            PairKind::JI => 1.0,
            PairKind::IM => self.im,
            PairKind::JM => self.jm,
            PairKind::MI => self.mi,
            PairKind::MM => self.mm,
        }
    }
}

impl Default for Lambdas {
    fn default() -> Self {
        Lambdas::uniform(1.0)
    }
}

/// Training hyperparameters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct HyperParams {
    pub dim: usize,
    pub window: usize,
    pub epochs: usize,
    pub negatives: usize,
    pub learning_rate: f64,
    pub lambda: Lambdas,
    pub min_count: u64,
    pub power: f64,
    pub seed: u64,
    pub threads: usize,
    /// Draw the window radius uniformly from `1..=window` per position.
    pub dynamic_window: bool,
    /// Frequent-item subsampling threshold; `None` disables it.
    pub subsample: Option<f64>,
}

impl Default for HyperParams {
    fn default() -> Self {
        HyperParams {
            dim: 50,
            window: 3,
            epochs: 10,
            negatives: 5,
            learning_rate: 0.025,
            lambda: Lambdas::default(),
            min_count: 5,
            power: 0.75,
            seed: 1,
            threads: 1,
            dynamic_window: false,
            subsample: None,
        }
    }
}

impl HyperParams {
    pub fn validate(&self) -> Result<()> {
        let bad = |msg: &str| Err(Error::InvalidParameter(msg.into()));
        if self.dim == 0 {
            return bad("dim must be >= 1");
        }
        if self.window == 0 {
            return bad("window must be >= 1");
        }
        if self.epochs == 0 {
            return bad("epochs must be >= 1");
        }
        if self.negatives == 0 {
            return bad("negatives must be >= 1");
        }
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return bad("learning rate must be finite and > 0");
        }
        let l = &self.lambda;
        if [l.im, l.jm, l.mi, l.mm].iter().any(|x| !(*x >= 0.0 && x.is_finite())) {
            return bad("lambdas must be finite and >= 0");
        }
        if self.min_count == 0 {
            return bad("min_count must be >= 1");
        }
        if self.threads == 0 {
            return bad("threads must be >= 1");
        }
        if let Some(t) = self.subsample {
            if !(t > 0.0 && t.is_finite()) {
                return bad("subsample threshold must be > 0");
            }
        }
        Ok(())
    }

    /// Kinds that actually train: JI plus every enabled kind with λ > 0.
    pub fn active_kinds(&self, enabled: KindSet) -> KindSet {
        enabled
            .iter()
            .filter(|&k| self.lambda.weight(k) > 0.0)
            .fold(KindSet::PROD2VEC, KindSet::with)
    }
}

/// Linear decay from `base` to `base * MIN_RATE_FRACTION` over `total` pairs.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Schedule {
    pub base: f64,
    pub total: u64,
}

impl Schedule {
    pub fn rate(&self, processed: u64) -> f64 {
        let frac = 1.0 - processed as f64 / self.total.max(1) as f64;
        self.base * frac.max(MIN_RATE_FRACTION)
    }
}

/// Loss sums and pair counts per kind.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct KindLoss {
    pub loss: [f64; 5],
    pub pairs: [u64; 5],
}

impl KindLoss {
    pub fn record(&mut self, kind: PairKind, loss: f64) {
        self.loss[kind as usize] += loss;
        self.pairs[kind as usize] += 1;
    }

    pub fn merge(&mut self, other: &KindLoss) {
        for k in 0..5 {
            self.loss[k] += other.loss[k];
            self.pairs[k] += other.pairs[k];
        }
    }

    /// Mean loss of `kind`, `None` if no pair of that kind was seen.
    pub fn mean(&self, kind: PairKind) -> Option<f64> {
        let n = self.pairs[kind as usize];
        (n > 0).then(|| self.loss[kind as usize] / n as f64)
    }

    pub fn total_pairs(&self) -> u64 {
        self.pairs.iter().sum()
    }
}

/// Immutable training context shared by all workers.
#[derive(Debug)]
pub struct Trainer<'a> {
    params: &'a HyperParams,
    kinds: KindSet,
    weights: [f64; 5],
    sampler: &'a NegativeSampler,
    schedule: Schedule,
    // per-token probability of keeping a position when subsampling
    keep: Option<Vec<f64>>,
    shuffle_rng: ChaCha8Rng,
}

impl<'a> Trainer<'a> {
    /// `frequencies` are the vocabulary frequencies, used for subsampling.
    pub fn new(
        params: &'a HyperParams,
        enabled: KindSet,
        sampler: &'a NegativeSampler,
        sessions: &[EncodedSession],
        frequencies: &[u64],
    ) -> Result<Self> {
        params.validate()?;
        let kinds = params.active_kinds(enabled);
        let per_epoch: u64 = sessions.iter().map(|s| count_pairs(s, params.window, kinds)).sum();
        if per_epoch == 0
            || !sessions
                .iter()
                .any(|s| count_pairs(s, params.window, KindSet::PROD2VEC) > 0)
        {
            return Err(Error::NoTrainingPairs);
        }
        let mut weights = [0.0; 5];
        for k in PairKind::ALL {
            weights[k as usize] = params.lambda.weight(k);
        }
        let keep = params.subsample.map(|t| {
            let total: u64 = frequencies.iter().sum();
            frequencies
                .iter()
                .map(|&f| {
                    let f = f as f64 / total.max(1) as f64;
                    if f <= 0.0 {
                        1.0
                    } else {
                        (libm::sqrt(t / f) + t / f).min(1.0)
                    }
                })
                .collect()
        });
        let mut shuffle_rng = ChaCha8Rng::seed_from_u64(params.seed);
        shuffle_rng.set_stream(SHUFFLE_STREAM);
        Ok(Trainer {
            params,
            kinds,
            weights,
            sampler,
            schedule: Schedule {
                base: params.learning_rate,
                total: per_epoch * params.epochs as u64,
            },
            keep,
            shuffle_rng,
        })
    }

    pub fn kinds(&self) -> KindSet {
        self.kinds
    }

    pub fn schedule(&self) -> Schedule {
        self.schedule
    }

    /// Fresh, deterministically initialized model.
    pub fn init_model(&self, rows: usize) -> Result<EmbeddingModel<f32>> {
        EmbeddingModel::init(rows, self.params.dim, self.params.seed)
    }

    /// Random stream of worker `worker`, independent of the initialization
    /// and shuffling streams.
    pub fn worker_rng(&self, worker: usize) -> ChaCha8Rng {
        let mut rng = ChaCha8Rng::seed_from_u64(self.params.seed);
        rng.set_stream(WORKER_STREAM_BASE + worker as u64);
        rng
    }

    /// Shuffled session order for the next epoch.
    pub fn next_epoch_order(&mut self, n_sessions: usize) -> Vec<usize> {
        let mut order: Vec<usize> = (0..n_sessions).collect();
        order.shuffle(&mut self.shuffle_rng);
        order
    }

    /// Trains on `sessions[order[..]]`, advancing the shared pair counter
    /// that drives the learning-rate schedule.
    pub fn run_sessions<T: Tables + ?Sized, R: Rng>(
        &self,
        tables: &mut T,
        sessions: &[EncodedSession],
        order: &[usize],
        rng: &mut R,
        progress: &AtomicU64,
        stats: &mut KindLoss,
    ) -> Result<()> {
        let mut scratch = Scratch::default();
        let mut negatives = Vec::with_capacity(self.params.negatives);
        let mut kept = EncodedSession::default();
        let mut windows = Vec::new();
        let mut pairs = Vec::new();
        let window = self.params.window;
        for &idx in order {
            let session = match &self.keep {
                Some(keep) => {
                    subsample_into(&sessions[idx], keep, rng, &mut kept);
                    &kept
                }
                None => &sessions[idx],
            };
            windows.clear();
            if self.params.dynamic_window {
                windows.extend((0..session.len()).map(|_| rng.random_range(1..=window)));
            }
            pairs.clear();
            for_each_pair(
                session,
                self.kinds,
                |pos| windows.get(pos).copied().unwrap_or(window),
                |p| pairs.push(p),
            );
            let start = progress.load(Ordering::Relaxed);
            for (offset, pair) in pairs.iter().enumerate() {
                let lr = self.schedule.rate(start + offset as u64);
                self.sampler
                    .sample_into(self.params.negatives, pair.output, rng, &mut negatives)?;
                let loss = sgns_step(
                    tables,
                    pair,
                    &negatives,
                    lr,
                    self.weights[pair.kind as usize],
                    &mut scratch,
                )?;
                stats.record(pair.kind, loss);
            }
            progress.fetch_add(pairs.len() as u64, Ordering::Relaxed);
        }
        Ok(())
    }
}

/// Deterministic single-threaded training.
///
/// `on_epoch` is called after every epoch with its index and loss summary.
pub fn train<F>(
    params: &HyperParams,
    enabled: KindSet,
    sessions: &[EncodedSession],
    frequencies: &[u64],
    mut on_epoch: F,
) -> Result<EmbeddingModel<f32>>
where
    F: FnMut(usize, &KindLoss),
{
    let sampler = NegativeSampler::new(frequencies, params.power)?;
    let mut trainer = Trainer::new(params, enabled, &sampler, sessions, frequencies)?;
    let mut model = trainer.init_model(frequencies.len())?;
    let mut rng = trainer.worker_rng(0);
    let progress = AtomicU64::new(0);
    for epoch in 0..params.epochs {
        let order = trainer.next_epoch_order(sessions.len());
        let mut stats = KindLoss::default();
        trainer.run_sessions(&mut model, sessions, &order, &mut rng, &progress, &mut stats)?;
        on_epoch(epoch, &stats);
    }
    Ok(model)
}

fn subsample_into<R: Rng>(src: &EncodedSession, keep: &[f64], rng: &mut R, dst: &mut EncodedSession) {
    dst.items.clear();
    dst.meta.clear();
    dst.n_attrs = src.n_attrs;
    for (pos, &item) in src.items.iter().enumerate() {
        if rng.random::<f64>() < keep[item as usize] {
            dst.items.push(item);
            dst.meta
                .extend_from_slice(&src.meta[pos * src.n_attrs..(pos + 1) * src.n_attrs]);
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;

    fn corpus() -> (Vec<EncodedSession>, Vec<u64>) {
        // items 0..4, metadata 4..6
        let sessions = vec![
            EncodedSession::with_single_attribute(vec![0, 1, 2, 3], vec![Some(4), Some(4), Some(5), Some(5)]),
            EncodedSession::with_single_attribute(vec![1, 0, 3], vec![Some(4), Some(4), Some(5)]),
            EncodedSession::with_single_attribute(vec![2, 3, 2], vec![Some(5), Some(5), Some(5)]),
        ];
        let mut freq = vec![0u64; 6];
        for s in &sessions {
            for (p, &i) in s.items.iter().enumerate() {
                freq[i as usize] += 1;
                freq[s.meta_at(p, 0).unwrap() as usize] += 1;
            }
        }
        (sessions, freq)
    }

    #[test]
    fn schedule_decays_linearly_to_floor() {
        let s = Schedule {
            base: 0.025,
            total: 100,
        };
        assert_eq!(s.rate(0), 0.025);
        assert!((s.rate(50) - 0.0125).abs() < 1e-15);
        assert_eq!(s.rate(100), 0.025 * MIN_RATE_FRACTION);
        assert_eq!(s.rate(1000), 0.025 * MIN_RATE_FRACTION);
    }

    #[test]
    fn zero_lambda_kinds_are_inactive() {
        let mut p = HyperParams::default();
        assert_eq!(p.active_kinds(KindSet::ALL), KindSet::ALL);
        p.lambda = Lambdas::uniform(0.0);
        assert_eq!(p.active_kinds(KindSet::ALL), KindSet::PROD2VEC);
        p.lambda.jm = 0.5;
        assert_eq!(p.active_kinds(KindSet::ALL), KindSet::of(&[PairKind::JI, PairKind::JM]));
        assert_eq!(p.active_kinds(KindSet::PROD2VEC), KindSet::PROD2VEC);
    }

    #[test]
    fn validation() {
        let ok = HyperParams::default();
        assert!(ok.validate().is_ok());
        for broken in [
            HyperParams { dim: 0, ..ok.clone() },
            HyperParams {
                epochs: 0,
                ..ok.clone()
            },
            HyperParams {
                negatives: 0,
                ..ok.clone()
            },
            HyperParams {
                lambda: Lambdas::uniform(-1.0),
                ..ok.clone()
            },
            HyperParams {
                subsample: Some(0.0),
                ..ok.clone()
            },
        ] {
            assert!(broken.validate().is_err(), "{broken:?}");
        }
    }

    #[test]
    fn deterministic_and_finite() {
        let (sessions, freq) = corpus();
        let params = HyperParams {
            dim: 8,
            epochs: 5,
            min_count: 1,
            ..HyperParams::default()
        };
        let mut log = Vec::new();
        let a = train(&params, KindSet::ALL, &sessions, &freq, |e, s| log.push((e, *s))).unwrap();
        let b = train(&params, KindSet::ALL, &sessions, &freq, |_, _| {}).unwrap();
        assert_eq!(a, b);
        assert!(a.is_finite());
        assert_eq!(log.len(), 5);
        assert!(log.iter().all(|(_, s)| s.mean(PairKind::MM).is_some()));
    }

    #[test]
    fn dynamic_window_and_subsampling_run() {
        let (sessions, freq) = corpus();
        let params = HyperParams {
            dim: 4,
            epochs: 3,
            min_count: 1,
            dynamic_window: true,
            subsample: Some(1e-3),
            ..HyperParams::default()
        };
        let m = train(&params, KindSet::ALL, &sessions, &freq, |_, _| {}).unwrap();
        assert!(m.is_finite());
    }

    #[test]
    fn sessions_without_context_are_rejected() {
        let sessions = vec![EncodedSession::from_items(vec![0])];
        let params = HyperParams::default();
        let err = train(&params, KindSet::PROD2VEC, &sessions, &[1, 1], |_, _| {}).unwrap_err();
        assert_eq!(err, Error::NoTrainingPairs);
    }
}
