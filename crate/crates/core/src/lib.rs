//! Accuracy-aware approximate request processing for parallel online
//! services.
//!
//! Offline, every component's share of the input data is condensed into a
//! small synopsis of aggregated points (factorize, group with an R-tree,
//! aggregate). Online, a component answers a request from its synopsis
//! first, ranks the aggregated points by their estimated relevance to the
//! request, and then refines the answer with the original points behind
//! the best-ranked aggregates until its deadline expires.

// `!(x > 0.0)` is used deliberately so that NaN fails validation.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod cf;
pub mod dataset;
pub mod dimred;
pub mod effectiveness;
pub mod engine;
pub mod error;
pub mod num;
pub mod search;
pub mod sim;
pub mod spatial;
pub mod synopsis;
pub mod synth;

pub use error::{Error, Result};
pub use num::Scalar;

/// Default scalar for the concrete pipeline.
pub type Real = f64;
pub type FeatureMatrix = dimred::FeatureMatrix<Real>;
pub type SvdConfig = dimred::SvdConfig<Real>;
pub type NumericDataset = dataset::NumericDataset<Real>;
pub type RTree = spatial::RTree<Real>;
pub type ReducedPoint = spatial::ReducedPoint<Real>;
