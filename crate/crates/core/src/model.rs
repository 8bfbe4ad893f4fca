//! Embedding tables and the negative-sampling loss and update.
//!
//! Dot products and gradients are always accumulated in `f64`; the tables
//! store `f32` by default or `f64` for gradient checking.

use alloc::vec;
use alloc::vec::Vec;
use core::fmt::Debug;
use core::sync::atomic::{AtomicU32, Ordering};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::pairgen::TrainingPair;

/// Storage precision of embedding tables.
pub trait Real: Copy + Debug + PartialEq + Send + Sync + 'static {
    const ZERO: Self;
    fn to_f64(self) -> f64;
    fn from_f64(x: f64) -> Self;
}

impl Real for f32 {
    const ZERO: Self = 0.0;
    #[inline]
    fn to_f64(self) -> f64 {
        self as f64
    }
    #[inline]
    fn from_f64(x: f64) -> Self {
        x as f32
    }
}

impl Real for f64 {
    const ZERO: Self = 0.0;
    #[inline]
    fn to_f64(self) -> f64 {
        self
    }
    #[inline]
    fn from_f64(x: f64) -> Self {
        x
    }
}

/// Row access to an input table and an output table of equal shape.
///
/// Writes take `&mut self`; shared lock-free storage implements this on a
/// cheap per-thread view instead of the storage itself.
pub trait Tables {
    fn rows(&self) -> usize;
    fn dim(&self) -> usize;
    fn read_input(&self, row: usize, out: &mut [f64]);
    fn read_output(&self, row: usize, out: &mut [f64]);
    /// Adds `delta` to an input row. Returns `false` if a stored value became non-finite.
    fn add_input(&mut self, row: usize, delta: &[f64]) -> bool;
    /// Adds `delta` to an output row. Returns `false` if a stored value became non-finite.
    fn add_output(&mut self, row: usize, delta: &[f64]) -> bool;
}

/// Input vectors `W_in` and output (context) vectors `W_out`, one row per
/// vocabulary token, stored row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct EmbeddingModel<F: Real = f32> {
    rows: usize,
    dim: usize,
    input: Vec<F>,
    output: Vec<F>,
}

impl<F: Real> EmbeddingModel<F> {
    /// All-zero tables.
    pub fn zeros(rows: usize, dim: usize) -> Self {
        EmbeddingModel {
            rows,
            dim,
            input: vec![F::ZERO; rows * dim],
            output: vec![F::ZERO; rows * dim],
        }
    }

    /// Word2vec initialization: input entries uniform in `[-0.5/dim, 0.5/dim]`,
    /// output entries zero. Deterministic in `seed`.
    pub fn init(rows: usize, dim: usize, seed: u64) -> Result<Self> {
        if dim == 0 {
            return Err(Error::InvalidParameter("dim must be >= 1".into()));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let half = 0.5 / dim as f64;
        let mut model = Self::zeros(rows, dim);
        for x in &mut model.input {
            *x = F::from_f64(rng.random_range(-half..=half));
        }
        Ok(model)
    }

    /// Builds a model from row-major tables.
    pub fn from_tables(rows: usize, dim: usize, input: Vec<F>, output: Vec<F>) -> Result<Self> {
        if input.len() != rows * dim {
            return Err(Error::DimensionMismatch {
                left: input.len(),
                right: rows * dim,
            });
        }
        if output.len() != rows * dim {
            return Err(Error::DimensionMismatch {
                left: output.len(),
                right: rows * dim,
            });
        }
        Ok(EmbeddingModel {
            rows,
            dim,
            input,
            output,
        })
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn input_row(&self, row: usize) -> &[F] {
        &self.input[row * self.dim..(row + 1) * self.dim]
    }

    pub fn output_row(&self, row: usize) -> &[F] {
        &self.output[row * self.dim..(row + 1) * self.dim]
    }

    pub fn input_row_mut(&mut self, row: usize) -> &mut [F] {
        &mut self.input[row * self.dim..(row + 1) * self.dim]
    }

    pub fn output_row_mut(&mut self, row: usize) -> &mut [F] {
        &mut self.output[row * self.dim..(row + 1) * self.dim]
    }

    pub fn input_table(&self) -> &[F] {
        &self.input
    }

    pub fn output_table(&self) -> &[F] {
        &self.output
    }

    pub fn is_finite(&self) -> bool {
        self.input.iter().chain(&self.output).all(|x| x.to_f64().is_finite())
    }

    /// Converts the storage precision.
    pub fn cast<G: Real>(&self) -> EmbeddingModel<G> {
        EmbeddingModel {
            rows: self.rows,
            dim: self.dim,
            input: self.input.iter().map(|x| G::from_f64(x.to_f64())).collect(),
            output: self.output.iter().map(|x| G::from_f64(x.to_f64())).collect(),
        }
    }
}

#[inline]
fn add_row<F: Real>(row: &mut [F], delta: &[f64]) -> bool {
    let mut finite = true;
    for (x, d) in row.iter_mut().zip(delta) {
        let v = F::from_f64(x.to_f64() + d);
        finite &= v.to_f64().is_finite();
        *x = v;
    }
    finite
}

impl<F: Real> Tables for EmbeddingModel<F> {
    fn rows(&self) -> usize {
        self.rows
    }

    fn dim(&self) -> usize {
        self.dim
    }

    fn read_input(&self, row: usize, out: &mut [f64]) {
        for (o, x) in out.iter_mut().zip(self.input_row(row)) {
            *o = x.to_f64();
        }
    }

    fn read_output(&self, row: usize, out: &mut [f64]) {
        for (o, x) in out.iter_mut().zip(self.output_row(row)) {
            *o = x.to_f64();
        }
    }

    fn add_input(&mut self, row: usize, delta: &[f64]) -> bool {
        add_row(self.input_row_mut(row), delta)
    }

    fn add_output(&mut self, row: usize, delta: &[f64]) -> bool {
        add_row(self.output_row_mut(row), delta)
    }
}

/// `f32` tables updated concurrently without locks (Hogwild).
///
/// Each entry is an `AtomicU32` holding `f32` bits, accessed with relaxed
/// loads and stores: concurrent updates of the same row may lose increments,
/// but no value is ever torn.
#[derive(Debug)]
pub struct SharedModel {
    rows: usize,
    dim: usize,
    input: Vec<AtomicU32>,
    output: Vec<AtomicU32>,
}

impl SharedModel {
    pub fn new(model: &EmbeddingModel<f32>) -> Self {
        let wrap = |t: &[f32]| t.iter().map(|x| AtomicU32::new(x.to_bits())).collect();
        SharedModel {
            rows: model.rows,
            dim: model.dim,
            input: wrap(&model.input),
            output: wrap(&model.output),
        }
    }

    /// A handle implementing [`Tables`]; one per worker.
    pub fn view(&self) -> SharedView<'_> {
        SharedView { model: self }
    }

    pub fn into_model(self) -> EmbeddingModel<f32> {
        let unwrap = |t: Vec<AtomicU32>| t.into_iter().map(|x| f32::from_bits(x.into_inner())).collect();
        EmbeddingModel {
            rows: self.rows,
            dim: self.dim,
            input: unwrap(self.input),
            output: unwrap(self.output),
        }
    }
}

#[derive(Debug, Clone, Copy)]
pub struct SharedView<'a> {
    model: &'a SharedModel,
}

#[inline]
fn read_atomic(row: &[AtomicU32], out: &mut [f64]) {
    for (o, x) in out.iter_mut().zip(row) {
        *o = f32::from_bits(x.load(Ordering::Relaxed)) as f64;
    }
}

#[inline]
fn add_atomic(row: &[AtomicU32], delta: &[f64]) -> bool {
    let mut finite = true;
    for (x, d) in row.iter().zip(delta) {
        let v = (f32::from_bits(x.load(Ordering::Relaxed)) as f64 + d) as f32;
        finite &= v.is_finite();
        x.store(v.to_bits(), Ordering::Relaxed);
    }
    finite
}

impl Tables for SharedView<'_> {
    fn rows(&self) -> usize {
        self.model.rows
    }

    fn dim(&self) -> usize {
        self.model.dim
    }

    fn read_input(&self, row: usize, out: &mut [f64]) {
        let d = self.model.dim;
        read_atomic(&self.model.input[row * d..(row + 1) * d], out);
    }

    fn read_output(&self, row: usize, out: &mut [f64]) {
        let d = self.model.dim;
        read_atomic(&self.model.output[row * d..(row + 1) * d], out);
    }

    fn add_input(&mut self, row: usize, delta: &[f64]) -> bool {
        let d = self.model.dim;
        add_atomic(&self.model.input[row * d..(row + 1) * d], delta)
    }

    fn add_output(&mut self, row: usize, delta: &[f64]) -> bool {
        let d = self.model.dim;
        add_atomic(&self.model.output[row * d..(row + 1) * d], delta)
    }
}

/// Numerically stable `log σ(x)`.
#[inline]
pub fn log_sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        -libm::log1p(libm::exp(-x))
    } else {
        x - libm::log1p(libm::exp(x))
    }
}

#[inline]
pub fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + libm::exp(-x))
    } else {
        let e = libm::exp(x);
        e / (1.0 + e)
    }
}

#[inline]
fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn check_pair<T: Tables + ?Sized>(tables: &T, pair: &TrainingPair, negatives: &[u32]) -> Result<()> {
    let len = tables.rows();
    for idx in [pair.input, pair.output].iter().chain(negatives) {
        if *idx as usize >= len {
            return Err(Error::IndexOutOfRange {
                index: *idx as usize,
                len,
            });
        }
    }
    if negatives.is_empty() {
        return Err(Error::InvalidParameter("at least one negative is required".into()));
    }
    if negatives.contains(&pair.output) {
        return Err(Error::InvalidParameter(
            "negatives must differ from the positive output".into(),
        ));
    }
    Ok(())
}

/// `-log σ(w_in[input]·w_out[output]) - Σ_N log σ(-w_in[input]·w_out[N])`.
pub fn pair_loss<T: Tables + ?Sized>(tables: &T, pair: &TrainingPair, negatives: &[u32]) -> Result<f64> {
    check_pair(tables, pair, negatives)?;
    let d = tables.dim();
    let mut input = vec![0.0; d];
    let mut out = vec![0.0; d];
    tables.read_input(pair.input as usize, &mut input);
    tables.read_output(pair.output as usize, &mut out);
    let mut loss = -log_sigmoid(dot(&input, &out));
    for &n in negatives {
        tables.read_output(n as usize, &mut out);
        loss -= log_sigmoid(-dot(&input, &out));
    }
    Ok(loss)
}

/// Reusable buffers for [`sgns_step`].
#[derive(Debug, Clone, Default)]
pub struct Scratch {
    input: Vec<f64>,
    outputs: Vec<f64>,
    coeffs: Vec<f64>,
    input_grad: Vec<f64>,
    delta: Vec<f64>,
}

/// One SGD step on a positive pair and its negatives.
///
/// Every gradient is taken at the pre-update point: all rows are read before
/// any is written, so repeated negatives simply accumulate. The update is
/// `-weight · learning_rate · ∇pair_loss`. Returns the loss before the update.
pub fn sgns_step<T: Tables + ?Sized>(
    tables: &mut T,
    pair: &TrainingPair,
    negatives: &[u32],
    learning_rate: f64,
    weight: f64,
    scratch: &mut Scratch,
) -> Result<f64> {
    check_pair(tables, pair, negatives)?;
    if learning_rate.is_nan() || learning_rate <= 0.0 {
        return Err(Error::InvalidParameter("learning rate must be > 0".into()));
    }
    let d = tables.dim();
    let targets = negatives.len() + 1;
    scratch.input.resize(d, 0.0);
    scratch.outputs.resize(targets * d, 0.0);
    scratch.coeffs.resize(targets, 0.0);
    scratch.input_grad.clear();
    scratch.input_grad.resize(d, 0.0);
    scratch.delta.resize(d, 0.0);

    tables.read_input(pair.input as usize, &mut scratch.input);
    let mut loss = 0.0;
    for t in 0..targets {
        let (row, label) = if t == 0 {
            (pair.output, 1.0)
        } else {
            (negatives[t - 1], 0.0)
        };
        let out = &mut scratch.outputs[t * d..(t + 1) * d];
        tables.read_output(row as usize, out);
        let s = dot(&scratch.input, out);
        loss -= if t == 0 { log_sigmoid(s) } else { log_sigmoid(-s) };
        // d loss / d s: σ(s) - 1 for the positive, σ(s) for negatives
        let g = sigmoid(s) - label;
        scratch.coeffs[t] = g;
        for (acc, o) in scratch.input_grad.iter_mut().zip(out.iter()) {
            *acc += g * o;
        }
    }
    if !loss.is_finite() || scratch.input_grad.iter().any(|g| !g.is_finite()) {
        return Err(Error::NonFinite {
            input: pair.input as usize,
            output: pair.output as usize,
        });
    }
    if weight == 0.0 {
        return Ok(loss);
    }

    let step = -weight * learning_rate;
    let mut finite = true;
    for t in 0..targets {
        let row = if t == 0 { pair.output } else { negatives[t - 1] };
        let g = scratch.coeffs[t];
        for (dst, x) in scratch.delta.iter_mut().zip(&scratch.input) {
            *dst = step * g * x;
        }
        finite &= tables.add_output(row as usize, &scratch.delta);
    }
    for (dst, g) in scratch.delta.iter_mut().zip(&scratch.input_grad) {
        *dst = step * g;
    }
    finite &= tables.add_input(pair.input as usize, &scratch.delta);
    if !finite {
        return Err(Error::NonFinite {
            input: pair.input as usize,
            output: pair.output as usize,
        });
    }
    Ok(loss)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::pairgen::PairKind;

    const LN2: f64 = core::f64::consts::LN_2;

    #[test]
    fn init_range_and_determinism() {
        let a = EmbeddingModel::<f32>::init(37, 50, 9).unwrap();
        assert!(a.input_table().iter().all(|x| x.abs() <= 0.01));
        assert!(a.output_table().iter().all(|&x| x == 0.0));
        let b = EmbeddingModel::<f32>::init(37, 50, 9).unwrap();
        assert_eq!(a, b);
        let c = EmbeddingModel::<f32>::init(37, 50, 10).unwrap();
        assert_ne!(a, c);
        assert!(EmbeddingModel::<f32>::init(3, 0, 1).is_err());
    }

    #[test]
    fn zero_model_loss_is_log2_per_target() {
        let m = EmbeddingModel::<f64>::zeros(6, 3);
        let p = TrainingPair::new(0, 1, PairKind::JI);
        assert!((pair_loss(&m, &p, &[2]).unwrap() - 2.0 * LN2).abs() < 1e-15);
        assert!((pair_loss(&m, &p, &[2, 3, 4, 5]).unwrap() - 5.0 * LN2).abs() < 1e-14);
    }

    #[test]
    fn loss_rejects_bad_indices() {
        let m = EmbeddingModel::<f64>::zeros(3, 2);
        let p = TrainingPair::new(0, 7, PairKind::JI);
        assert_eq!(
            pair_loss(&m, &p, &[1]),
            Err(Error::IndexOutOfRange { index: 7, len: 3 })
        );
        let p = TrainingPair::new(0, 1, PairKind::JI);
        assert!(pair_loss(&m, &p, &[1]).is_err());
        assert!(pair_loss(&m, &p, &[]).is_err());
    }

    #[test]
    fn zero_weight_leaves_model_unchanged() {
        let mut m = EmbeddingModel::<f64>::init(5, 4, 1).unwrap();
        for r in 0..5 {
            m.output_row_mut(r).iter_mut().for_each(|x| *x = 0.1 * r as f64);
        }
        let before = m.clone();
        let p = TrainingPair::new(0, 1, PairKind::MM);
        let loss = sgns_step(&mut m, &p, &[2, 3], 0.5, 0.0, &mut Scratch::default()).unwrap();
        assert_eq!(m, before);
        assert_eq!(loss, pair_loss(&before, &p, &[2, 3]).unwrap());
    }

    #[test]
    fn small_step_decreases_loss() {
        let mut m = EmbeddingModel::<f64>::init(6, 4, 2).unwrap();
        for r in 0..6 {
            for (c, x) in m.output_row_mut(r).iter_mut().enumerate() {
                *x = 0.05 * ((r * 4 + c) as f64).sin();
            }
        }
        let p = TrainingPair::new(1, 2, PairKind::JI);
        let neg = [3, 4, 0];
        let before = pair_loss(&m, &p, &neg).unwrap();
        let reported = sgns_step(&mut m, &p, &neg, 1e-3, 1.0, &mut Scratch::default()).unwrap();
        assert_eq!(before, reported);
        assert!(pair_loss(&m, &p, &neg).unwrap() < before);
    }

    #[test]
    fn overflow_is_reported() {
        let mut m = EmbeddingModel::<f32>::zeros(3, 1);
        m.input_row_mut(0)[0] = 1e30;
        m.output_row_mut(1)[0] = -1e30;
        let p = TrainingPair::new(0, 1, PairKind::JI);
        let err = sgns_step(&mut m, &p, &[2], 1e10, 1.0, &mut Scratch::default()).unwrap_err();
        assert!(matches!(err, Error::NonFinite { .. }));
    }

    #[test]
    fn shared_model_round_trip() {
        let m = EmbeddingModel::<f32>::init(4, 3, 5).unwrap();
        let shared = SharedModel::new(&m);
        let mut view = shared.view();
        let mut a = m.clone();
        let p = TrainingPair::new(0, 1, PairKind::JI);
        let mut s = Scratch::default();
        sgns_step(&mut view, &p, &[2, 3], 0.1, 1.0, &mut s).unwrap();
        sgns_step(&mut a, &p, &[2, 3], 0.1, 1.0, &mut s).unwrap();
        assert_eq!(shared.into_model(), a);
    }
}
