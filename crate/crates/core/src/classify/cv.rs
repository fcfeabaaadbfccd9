//! Stratified k-fold cross-validation and feature-group ablation.

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::eval::{evaluate, Evaluation};
use super::models::{train, Model, ModelSpec};
use super::prep::{Imputer, Standardizer};
use super::Dataset;
use crate::error::{Error, Result};
use crate::features::FeatureGroup;
use crate::{par, stats};

/// Fold assignment for every sample.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FoldPlan {
    pub k: usize,
    pub assignment: Vec<usize>,
}

impl FoldPlan {
    /// Shuffles each class with a seeded stream, then deals its members
    /// round-robin. The dealing position carries over between classes so
    /// fold sizes also stay within one of each other.
    pub fn stratified(labels: &[usize], k: usize, seed: u64) -> Result<Self> {
        if k < 2 {
            return Err(Error::InvalidInput(format!("fold count {k} below 2")));
        }
        if labels.len() < k {
            return Err(Error::InvalidInput(format!(
                "{} samples cannot fill {k} folds",
                labels.len()
            )));
        }
        let n_classes = labels.iter().copied().max().map_or(0, |m| m + 1);
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut assignment = vec![0; labels.len()];
        let mut next = 0;
        for c in 0..n_classes {
            let mut members: Vec<usize> = (0..labels.len()).filter(|&i| labels[i] == c).collect();
            if !members.is_empty() && members.len() < k {
                log::warn!("class {c} has {} samples for {k} folds", members.len());
            }
            members.shuffle(&mut rng);
            for i in members {
                assignment[i] = next;
                next = (next + 1) % k;
            }
        }
        Ok(FoldPlan { k, assignment })
    }

    pub fn test_indices(&self, fold: usize) -> Vec<usize> {
        (0..self.assignment.len())
            .filter(|&i| self.assignment[i] == fold)
            .collect()
    }

    pub fn train_indices(&self, fold: usize) -> Vec<usize> {
        (0..self.assignment.len())
            .filter(|&i| self.assignment[i] != fold)
            .collect()
    }
}

/// Everything fitted on one training fold.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FoldModel {
    pub imputer: Imputer,
    pub standardizer: Standardizer,
    pub model: Model,
}

impl FoldModel {
    /// Fits imputation, standardization and the model on `rows` only.
    pub fn fit(
        spec: &ModelSpec,
        rows: &[&[Option<f64>]],
        labels: &[usize],
        n_classes: usize,
    ) -> Result<Self> {
        let imputer = Imputer::fit(rows)?;
        let dense: Vec<Vec<f64>> = rows.iter().map(|r| imputer.apply(r)).collect();
        let (standardizer, x) = Standardizer::fit_transform(&dense)?;
        let model = train(spec, &x, labels, n_classes)?;
        Ok(FoldModel {
            imputer,
            standardizer,
            model,
        })
    }

    pub fn transform(&self, row: &[Option<f64>]) -> Vec<f64> {
        self.standardizer.apply(&self.imputer.apply(row))
    }

    pub fn predict(&self, rows: &[&[Option<f64>]]) -> Result<Vec<usize>> {
        let x: Vec<Vec<f64>> = rows.iter().map(|r| self.transform(r)).collect();
        self.model.predict(&x)
    }
}

/// Fits on every fold but `fold`.
pub fn fit_fold(
    spec: &ModelSpec,
    data: &Dataset,
    plan: &FoldPlan,
    fold: usize,
) -> Result<FoldModel> {
    let train_idx = plan.train_indices(fold);
    let rows: Vec<&[Option<f64>]> = train_idx.iter().map(|&i| data.rows[i].as_slice()).collect();
    let labels: Vec<usize> = train_idx.iter().map(|&i| data.labels[i]).collect();
    FoldModel::fit(spec, &rows, &labels, data.n_classes())
}

/// Predictions for every sample, each made by the model of the fold that
/// held it out.
fn run_plan(spec: &ModelSpec, data: &Dataset, plan: &FoldPlan) -> Result<Vec<usize>> {
    let mut predicted = vec![0; data.len()];
    for fold in 0..plan.k {
        let test_idx = plan.test_indices(fold);
        if test_idx.is_empty() {
            continue;
        }
        let fm = fit_fold(spec, data, plan, fold)?;
        let rows: Vec<&[Option<f64>]> = test_idx.iter().map(|&i| data.rows[i].as_slice()).collect();
        for (i, p) in test_idx.into_iter().zip(fm.predict(&rows)?) {
            predicted[i] = p;
        }
    }
    Ok(predicted)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MeanStd {
    pub mean: f64,
    /// Population standard deviation across repeats.
    pub std: f64,
}

impl MeanStd {
    fn of(values: &[f64]) -> Self {
        let (mean, std) = stats::mean_std(values);
        MeanStd { mean, std }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassSummary {
    pub class: String,
    pub precision: MeanStd,
    pub recall: MeanStd,
    pub f1: MeanStd,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    pub accuracy: MeanStd,
    pub macro_f1: MeanStd,
    pub per_class: Vec<ClassSummary>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub model: ModelSpec,
    pub folds: usize,
    pub repeats: usize,
    pub seed: u64,
    pub classes: Vec<String>,
    pub features: Vec<String>,
    pub samples: usize,
    /// Run `r` used seed `seed + r`.
    pub runs: Vec<Evaluation>,
    pub summary: Summary,
    /// Confusion counts summed over runs.
    pub pooled_confusion: Vec<Vec<u64>>,
}

/// Repeated stratified k-fold cross-validation. Repeats run in parallel
/// and are collected in repeat order.
pub fn cross_validate(
    spec: &ModelSpec,
    data: &Dataset,
    k: usize,
    repeats: usize,
    seed: u64,
) -> Result<EvalReport> {
    if repeats == 0 {
        return Err(Error::InvalidInput(
            "at least one repeat is required".into(),
        ));
    }
    let names: Vec<String> = data.classes.iter().map(|c| c.name().to_string()).collect();
    let runs: Vec<Evaluation> = par::map_range(repeats, |r| {
        let plan = FoldPlan::stratified(&data.labels, k, seed.wrapping_add(r as u64))?;
        let predicted = run_plan(spec, data, &plan)?;
        evaluate(&predicted, &data.labels, &names)
    })
    .into_iter()
    .collect::<Result<_>>()?;

    let pick =
        |f: &dyn Fn(&Evaluation) -> f64| MeanStd::of(&runs.iter().map(f).collect::<Vec<_>>());
    let per_class = names
        .iter()
        .enumerate()
        .map(|(c, name)| ClassSummary {
            class: name.clone(),
            precision: pick(&|e| e.per_class[c].precision),
            recall: pick(&|e| e.per_class[c].recall),
            f1: pick(&|e| e.per_class[c].f1),
        })
        .collect();
    let summary = Summary {
        accuracy: pick(&|e| e.accuracy),
        macro_f1: pick(&|e| e.macro_f1),
        per_class,
    };
    let n = names.len();
    let mut pooled_confusion = vec![vec![0u64; n]; n];
    for e in &runs {
        for (t, row) in e.confusion.iter().enumerate() {
            for (p, v) in row.iter().enumerate() {
                pooled_confusion[t][p] += v;
            }
        }
    }
    Ok(EvalReport {
        model: *spec,
        folds: k,
        repeats,
        seed,
        classes: names,
        features: data.feature_names.clone(),
        samples: data.len(),
        runs,
        summary,
        pooled_confusion,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AblationReport {
    pub group: FeatureGroup,
    pub dropped: Vec<String>,
    pub baseline_accuracy: MeanStd,
    pub ablated_accuracy: MeanStd,
    /// `baseline - ablated`; positive means the group helped.
    pub accuracy_drop: f64,
    pub baseline: EvalReport,
    pub ablated: EvalReport,
}

/// Cross-validates with and without one feature group, on identical splits.
pub fn ablate(
    spec: &ModelSpec,
    data: &Dataset,
    group: FeatureGroup,
    k: usize,
    repeats: usize,
    seed: u64,
) -> Result<AblationReport> {
    let baseline = cross_validate(spec, data, k, repeats, seed)?;
    let reduced = data.without_group(group);
    let ablated = cross_validate(spec, &reduced, k, repeats, seed)?;
    Ok(AblationReport {
        group,
        dropped: group
            .columns()
            .iter()
            .map(|&c| data.feature_names[c].clone())
            .collect(),
        baseline_accuracy: baseline.summary.accuracy,
        ablated_accuracy: ablated.summary.accuracy,
        accuracy_drop: baseline.summary.accuracy.mean - ablated.summary.accuracy.mean,
        baseline,
        ablated,
    })
}
