//! Negative-sampling distribution over the whole vocabulary, items and
//! metadata alike, with `Pr[t] ∝ freq(t)^power`.

use alloc::vec::Vec;

use rand::distr::Distribution;
use rand::Rng;
use rand_distr::weighted::WeightedAliasIndex;

use crate::error::{Error, Result};

/// Alias-table sampler: O(1) draws, exact up to floating point.
#[derive(Debug, Clone)]
pub struct NegativeSampler {
    table: WeightedAliasIndex<f64>,
    probs: Vec<f64>,
    support: usize,
    power: f64,
}

impl NegativeSampler {
    /// Builds the sampler from per-token frequencies.
    pub fn new(frequencies: &[u64], power: f64) -> Result<Self> {
        if !(power >= 0.0 && power.is_finite()) {
            return Err(Error::InvalidParameter(alloc::format!(
                "sampling power must be finite and >= 0, got {power}"
            )));
        }
        let weights: Vec<f64> = frequencies
            .iter()
            .map(|&f| if f == 0 { 0.0 } else { libm::pow(f as f64, power) })
            .collect();
        let total: f64 = weights.iter().sum();
        if total <= 0.0 {
            return Err(Error::ZeroFrequency);
        }
        let probs = weights.iter().map(|w| w / total).collect();
        let support = weights.iter().filter(|&&w| w > 0.0).count();
        let table = WeightedAliasIndex::new(weights).map_err(|_| Error::ZeroFrequency)?;
        Ok(NegativeSampler {
            table,
            probs,
            support,
            power,
        })
    }

    pub fn power(&self) -> f64 {
        self.power
    }

    pub fn len(&self) -> usize {
        self.probs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.probs.is_empty()
    }

    /// Target probability of `index`.
    pub fn probability(&self, index: usize) -> f64 {
        self.probs[index]
    }

    pub fn probabilities(&self) -> &[f64] {
        &self.probs
    }

    /// One unrestricted draw.
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> u32 {
        self.table.sample(rng) as u32
    }

    /// Fills `out` with `k` i.i.d. draws, redrawing any that equal `excluded`.
    pub fn sample_into<R: Rng + ?Sized>(&self, k: usize, excluded: u32, rng: &mut R, out: &mut Vec<u32>) -> Result<()> {
        if k == 0 {
            return Err(Error::InvalidParameter("k must be >= 1".into()));
        }
        let excluded_has_mass = self.probs.get(excluded as usize).is_some_and(|&p| p > 0.0);
        if self.support < 2 && (excluded_has_mass || self.support == 0) {
            return Err(Error::DegenerateSampler);
        }
        out.clear();
        while out.len() < k {
            let draw = self.sample(rng);
            if draw != excluded {
                out.push(draw);
            }
        }
        Ok(())
    }

    /// `k` i.i.d. draws, none equal to `excluded`.
    pub fn sample_negatives<R: Rng + ?Sized>(&self, k: usize, excluded: u32, rng: &mut R) -> Result<Vec<u32>> {
        let mut out = Vec::with_capacity(k);
        self.sample_into(k, excluded, rng, &mut out)?;
        Ok(out)
    }
}
