//! Multi-threaded training with lock-free shared tables.
//!
//! Each epoch's shuffled session order is cut into one contiguous shard per
//! worker. Workers update the shared tables without synchronization, so runs
//! with more than one thread are not reproducible bit for bit.

use std::sync::atomic::AtomicU64;

use mp2v_core::corpus::EncodedSession;
use mp2v_core::model::{EmbeddingModel, SharedModel};
use mp2v_core::pairgen::KindSet;
use mp2v_core::sampler::NegativeSampler;
use mp2v_core::train::{self, HyperParams, KindLoss, Trainer};

use crate::error::Result;

/// Trains with `params.threads` workers; a single thread runs the
/// deterministic core trainer.
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
    if params.threads <= 1 {
        return Ok(train::train(params, enabled, sessions, frequencies, on_epoch)?);
    }
    let sampler = NegativeSampler::new(frequencies, params.power)?;
    let mut trainer = Trainer::new(params, enabled, &sampler, sessions, frequencies)?;
    let shared = SharedModel::new(&trainer.init_model(frequencies.len())?);
    let mut rngs: Vec<_> = (0..params.threads).map(|w| trainer.worker_rng(w)).collect();
    let progress = AtomicU64::new(0);
    for epoch in 0..params.epochs {
        let order = trainer.next_epoch_order(sessions.len());
        let shard_len = order.len().div_ceil(params.threads).max(1);
        let trainer = &trainer;
        let results: Vec<Result<KindLoss>> = std::thread::scope(|scope| {
            let handles: Vec<_> = order
                .chunks(shard_len)
                .zip(rngs.iter_mut())
                .map(|(shard, rng)| {
                    let shared = &shared;
                    let progress = &progress;
                    scope.spawn(move || {
                        let mut view = shared.view();
                        let mut stats = KindLoss::default();
                        trainer.run_sessions(&mut view, sessions, shard, rng, progress, &mut stats)?;
                        Ok(stats)
                    })
                })
                .collect();
            handles
                .into_iter()
                .map(|h| h.join().expect("training worker panicked"))
                .collect()
        });
        let mut stats = KindLoss::default();
        for r in results {
            stats.merge(&r?);
        }
        on_epoch(epoch, &stats);
    }
    Ok(shared.into_model())
}
