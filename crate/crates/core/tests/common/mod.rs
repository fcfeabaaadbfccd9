//! Shared test support: random mini-corpora and brute-force oracles.
#![allow(dead_code)]

pub mod mini;
pub mod oracle;

/// `|a - b| <= rel · max(|a|, |b|)`, with a 1e-12 absolute floor for
/// values that should be zero.
pub fn close(a: f64, b: f64, rel: f64) -> bool {
    (a - b).abs() <= rel * a.abs().max(b.abs()) + 1e-12
}
