//! Core algorithms for multi-site feature selection and meta-data analysis.
//!
//! Everything here is `no_std` + `alloc`: data model and validation, a
//! synthetic multi-site generator, a CART random forest, k-fold cross
//! validation, a binary genetic algorithm, hierarchical selection rounds,
//! correlation statistics with bootstrapped site replicates, and exact t-SNE.
//!
//! File formats, configuration and the command-line driver live in the
//! `metasel` crate. Enable the `parallel` feature to evaluate GA fitness,
//! CV folds and bootstrap replicates on a rayon pool; results are identical
//! to serial runs because every random stream is derived from a seed and a
//! position, never from execution order.

#![no_std]

extern crate alloc;
#[cfg(any(test, feature = "parallel"))]
extern crate std;

pub mod cv;
pub mod embed;
mod error;
pub mod forest;
pub mod ga;
pub mod hier;
pub mod meta;
mod par;
pub mod rng;
pub mod special;
pub mod synth;
pub mod tabular;

pub use error::{Error, Result, Warning};
pub use tabular::{FeatureTable, Label, Mask, Matrix};
