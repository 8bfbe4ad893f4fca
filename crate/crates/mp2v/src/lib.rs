//! File formats, multi-threaded training and the experiment pipeline for
//! Prod2Vec / Meta-Prod2Vec, on top of the `no_std` [`mp2v_core`] crate.

mod error;
pub mod hogwild;
pub mod io;
pub mod pipeline;
pub mod synthetic;

pub use error::{Error, Result};
pub use mp2v_core;
pub use pipeline::{cmd_ablate, cmd_eval, cmd_nn, cmd_train, Method, Mode, RunConfig};
