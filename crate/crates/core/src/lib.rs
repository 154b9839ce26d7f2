//! Quality scoring of publications from their citation-diffusion dynamics.
//!
//! The crate is organised bottom-up:
//!
//! * [`corpus`] loads and generates citation corpora and draws stratified samples.
//! * [`graph`] builds the immutable citation graph and answers temporal queries.
//! * [`community`] implements greedy modularity maximisation (and an exhaustive oracle).
//! * [`features`] computes the diversity, timeliness and saliency diffusion features.
//! * [`gam`] is a penalized cubic-spline generalized additive model with pairwise
//!   tensor-product interactions.
//! * [`pipeline`] runs the windowed next-year-gain regression / high-impact protocol.
//! * [`study`] repeats the pipeline over feature subsets and seeds and compares them
//!   with Welch t-tests, Cohen's d and Bonferroni correction.
//! * [`stats`] holds the shared statistics (correlation, quantiles, tests).

pub mod community;
pub mod corpus;
pub mod error;
pub mod features;
pub mod gam;
pub mod graph;
pub mod pipeline;
pub mod stats;
pub mod study;

pub use error::{Error, Result};
