//! Latent Fisher discriminant analysis for bag-labeled data.
//!
//! Training data comes as *bags* of feature vectors with one categorical
//! label per bag. Training alternates between inferring instance-level
//! latent labels (per-class Gaussian mixtures plus a kNN-vote cluster
//! selection) and refitting a regularized Fisher discriminant projection
//! on the relabeled subset. The crate also ships dataset ingestion, a
//! synthetic-data generator, stratified cross-validation benchmarking
//! against a plain-LDA baseline, and representative-instance ranking.

pub mod error;
pub mod gmm;
pub mod harness;
pub mod lda;
pub mod lfda;
pub mod linalg;
pub mod mildata;

pub use error::{Error, Result};
