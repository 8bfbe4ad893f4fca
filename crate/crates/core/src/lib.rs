//! Prod2Vec and Meta-Prod2Vec item embeddings: skip-gram with negative
//! sampling over session sequences, optionally regularized by categorical
//! item metadata embedded in the same space, plus the next-item evaluation
//! harness (popularity and co-occurrence baselines, embedding scorers,
//! blended ensembles, HR@K / NDCG@K with bootstrap intervals).
//!
//! This crate is `no_std` and only needs `alloc`. File formats, threads and
//! the command line live in the `mp2v` crate.
#![no_std]

extern crate alloc;
#[cfg(test)]
extern crate std;

pub mod cooc;
pub mod corpus;
mod error;
pub mod metrics;
pub mod model;
pub mod pairgen;
pub mod sampler;
pub mod scorer;
pub mod train;

pub use cooc::{CoCountMatrix, CoSimilarity};
pub use corpus::{
    build_vocabulary, parse_metadata, parse_sessions, split_sessions, EncodedSession, MetadataMap, Phase, Session,
    SplitCorpus, Vocabulary,
};
pub use error::{Error, Result};
pub use metrics::{EvalConfig, EvalReport};
pub use model::{pair_loss, sgns_step, EmbeddingModel, Tables};
pub use pairgen::{generate_pairs, KindSet, PairKind, TrainingPair};
pub use sampler::NegativeSampler;
pub use scorer::{cosine, BestOf, CoCounts, EmbeddingScorer, Mix, Scorer};
pub use train::{train, HyperParams, Lambdas};
