//! Seeded synthesis of labeled wideband RF capture datasets.
//!
//! The pipeline runs modulation, transmitter impairments, propagation,
//! multi-emitter scheduling and receiver capture end to end, then exports
//! IQ recordings, per-frame ground truth, spectrograms and COCO boxes.
//! Every draw derives from one master seed, so a dataset is reproducible
//! sample for sample regardless of worker count.
//!
//! The crate is a library first: each stage is usable on its own (see the
//! `examples/` directory for one runnable program per capability), and the
//! `radioforge` binary is a thin wrapper over [`cli`].

pub mod annotate;
pub mod assemble;
pub mod channel;
pub mod cli;
pub mod config;
pub mod error;
pub mod impair;
pub mod math;
pub mod modulate;
pub mod rng;
pub mod schedule;
pub mod source;

pub use error::{Error, Result};
