//! Train-fold-only preprocessing.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::stats::median;

/// Replaces missing values with the training median of their column
/// (0 when the column has no observed value).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Imputer {
    pub fill: Vec<f64>,
}

impl Imputer {
    pub fn fit(rows: &[&[Option<f64>]]) -> Result<Self> {
        let first = rows
            .first()
            .ok_or_else(|| Error::InvalidInput("empty training set".into()))?;
        let fill = (0..first.len())
            .map(|c| {
                let present: Vec<f64> = rows.iter().filter_map(|r| r[c]).collect();
                median(&present).unwrap_or(0.0)
            })
            .collect();
        Ok(Imputer { fill })
    }

    pub fn apply(&self, row: &[Option<f64>]) -> Vec<f64> {
        row.iter()
            .zip(&self.fill)
            .map(|(v, f)| v.unwrap_or(*f))
            .collect()
    }
}

/// Per-column `(x - mean) / std` with population std. A constant column is
/// passed through unchanged.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Standardizer {
    pub shift: Vec<f64>,
    pub scale: Vec<f64>,
}

impl Standardizer {
    pub fn fit(rows: &[Vec<f64>]) -> Result<Self> {
        let first = rows
            .first()
            .ok_or_else(|| Error::InvalidInput("empty training set".into()))?;
        let n = rows.len() as f64;
        let mut shift = Vec::with_capacity(first.len());
        let mut scale = Vec::with_capacity(first.len());
        for c in 0..first.len() {
            let mean = rows.iter().map(|r| r[c]).sum::<f64>() / n;
            let var = rows.iter().map(|r| (r[c] - mean).powi(2)).sum::<f64>() / n;
            let std = var.sqrt();
            if std > 0.0 && std.is_finite() {
                shift.push(mean);
                scale.push(std);
            } else {
                shift.push(0.0);
                scale.push(1.0);
            }
        }
        Ok(Standardizer { shift, scale })
    }

    pub fn apply(&self, row: &[f64]) -> Vec<f64> {
        row.iter()
            .zip(self.shift.iter().zip(&self.scale))
            .map(|(v, (m, s))| (v - m) / s)
            .collect()
    }

    /// Fits on `rows` and returns the transformed copies.
    pub fn fit_transform(rows: &[Vec<f64>]) -> Result<(Self, Vec<Vec<f64>>)> {
        let s = Self::fit(rows)?;
        let out = rows.iter().map(|r| s.apply(r)).collect();
        Ok((s, out))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn two_values_map_to_plus_minus_one() {
        let (_, out) = Standardizer::fit_transform(&[vec![1.0, 5.0], vec![3.0, 5.0]]).unwrap();
        assert_eq!(out, vec![vec![-1.0, 5.0], vec![1.0, 5.0]]);
    }

    #[test]
    fn empty_input_is_an_error() {
        assert!(Standardizer::fit(&[]).is_err());
        assert!(Imputer::fit(&[]).is_err());
    }

    #[test]
    fn columns_are_centred() {
        let rows: Vec<Vec<f64>> = (0..57)
            .map(|i| {
                let i = i as f64;
                vec![(i * 0.37).sin() * 1e3, i * i - 3.0, 1e-6 * (i * 1.3).cos()]
            })
            .collect();
        let (_, out) = Standardizer::fit_transform(&rows).unwrap();
        for c in 0..3 {
            let mean = out.iter().map(|r| r[c]).sum::<f64>() / out.len() as f64;
            assert!(mean.abs() < 1e-12, "column {c} mean {mean}");
        }
    }

    #[test]
    fn imputer_uses_training_median() {
        let a = [Some(1.0), None];
        let b = [Some(3.0), None];
        let c = [None, None];
        let imp = Imputer::fit(&[&a, &b, &c]).unwrap();
        assert_eq!(imp.fill, vec![2.0, 0.0]);
        assert_eq!(imp.apply(&c), vec![2.0, 0.0]);
    }
}
