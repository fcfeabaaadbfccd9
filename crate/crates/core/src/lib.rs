//! Spatial and temporal hashtag-diffusion metrics for geotagged microblog
//! corpora.
//!
//! The pipeline runs in a fixed order:
//!
//! 1. [`ingest`] parses post files and extracts hashtag tokens.
//! 2. [`corpus`] builds the immutable [`corpus::OccurrenceIndex`] and the
//!    heavy-tail occurrence/location histograms.
//! 3. [`spatial`] and [`temporal`] compute focus, entropy and spread per
//!    hashtag (over locations and over days respectively), plus the
//!    regularity and peak-shape statistics.
//! 4. [`influence`] scores which city adopted hashtags first and how similar
//!    the popular vocabularies of two cities are.
//! 5. [`features`] assembles the 14-dimensional vector per hashtag and
//!    [`classify`] trains and cross-validates classifiers over it.
//!
//! [`synth`] generates labeled corpora with an exact ground-truth ledger so
//! every stage can be checked without access to a production dataset.
//!
//! With the default `parallel` feature, per-hashtag and per-pair work is
//! distributed with rayon. Without it every operation runs sequentially and
//! produces identical results.

pub mod classify;
pub mod corpus;
pub mod error;
pub mod features;
pub mod geo;
pub mod influence;
pub mod ingest;
pub mod par;
pub mod spatial;
pub mod stats;
pub mod synth;
pub mod temporal;

pub use error::{Error, Result};
