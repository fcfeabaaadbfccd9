//! The six classifiers. All operate on dense, already imputed and
//! standardized rows with compact class indices `0..n_classes`.

use serde::{Deserialize, Serialize};

use super::linalg::{Cholesky, SquareMatrix};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ModelKind {
    Knn,
    Cart,
    NaiveBayes,
    Logistic,
    Lda,
    #[serde(rename = "zeror")]
    ZeroR,
}

impl ModelKind {
    pub const ALL: [ModelKind; 6] = [
        ModelKind::Knn,
        ModelKind::Cart,
        ModelKind::NaiveBayes,
        ModelKind::Logistic,
        ModelKind::Lda,
        ModelKind::ZeroR,
    ];

    pub fn name(self) -> &'static str {
        match self {
            ModelKind::Knn => "knn",
            ModelKind::Cart => "cart",
            ModelKind::NaiveBayes => "naive_bayes",
            ModelKind::Logistic => "logistic",
            ModelKind::Lda => "lda",
            ModelKind::ZeroR => "zeror",
        }
    }
}

impl std::str::FromStr for ModelKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        ModelKind::ALL
            .into_iter()
            .find(|k| k.name() == s)
            .ok_or_else(|| Error::InvalidInput(format!("unknown model `{s}`")))
    }
}

/// Model choice plus hyperparameters.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ModelSpec {
    pub kind: ModelKind,
    pub knn_k: usize,
    pub cart_max_depth: usize,
    pub cart_min_leaf: usize,
    pub nb_var_floor: f64,
    pub logistic_l2: f64,
    pub logistic_tol: f64,
    pub logistic_max_iter: usize,
    /// Ridge added to the pooled covariance, relative to its mean eigenvalue.
    pub lda_ridge: f64,
}

impl ModelSpec {
    pub fn new(kind: ModelKind) -> Self {
        ModelSpec {
            kind,
            knn_k: 5,
            cart_max_depth: 8,
            cart_min_leaf: 3,
            nb_var_floor: 1e-9,
            logistic_l2: 1.0,
            logistic_tol: 1e-6,
            logistic_max_iter: 50_000,
            lda_ridge: 1e-6,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum CartNode {
    Leaf {
        class: usize,
    },
    Split {
        feature: usize,
        threshold: f64,
        left: usize,
        right: usize,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum Model {
    ZeroR {
        dim: usize,
        class: usize,
    },
    Knn {
        k: usize,
        rows: Vec<Vec<f64>>,
        labels: Vec<usize>,
        n_classes: usize,
    },
    Cart {
        dim: usize,
        nodes: Vec<CartNode>,
    },
    NaiveBayes {
        log_priors: Vec<f64>,
        means: Vec<Vec<f64>>,
        vars: Vec<Vec<f64>>,
    },
    Logistic {
        dim: usize,
        /// Per class: bias followed by one weight per feature.
        weights: Vec<Vec<f64>>,
        iterations: usize,
        grad_norm: f64,
    },
    Lda {
        coef: Vec<Vec<f64>>,
        intercept: Vec<f64>,
    },
}

fn check_rows(x: &[Vec<f64>], y: &[usize], n_classes: usize) -> Result<usize> {
    if x.is_empty() {
        return Err(Error::InvalidInput("empty training set".into()));
    }
    if x.len() != y.len() {
        return Err(Error::InvalidInput(format!(
            "{} rows but {} labels",
            x.len(),
            y.len()
        )));
    }
    let dim = x[0].len();
    for (r, row) in x.iter().enumerate() {
        if row.len() != dim {
            return Err(Error::DimensionMismatch {
                expected: dim,
                found: row.len(),
            });
        }
        if let Some(c) = row.iter().position(|v| !v.is_finite()) {
            return Err(Error::NonFinite { row: r, column: c });
        }
    }
    if let Some(&bad) = y.iter().find(|&&c| c >= n_classes) {
        return Err(Error::InvalidInput(format!(
            "label {bad} outside 0..{n_classes}"
        )));
    }
    Ok(dim)
}

fn class_counts(y: &[usize], n_classes: usize) -> Vec<usize> {
    let mut c = vec![0; n_classes];
    for &l in y {
        c[l] += 1;
    }
    c
}

/// First index of the maximum; ties go to the lowest index.
fn argmax(v: &[f64]) -> usize {
    let mut best = 0;
    for i in 1..v.len() {
        if v[i] > v[best] {
            best = i;
        }
    }
    best
}

fn require_all_classes(counts: &[usize]) -> Result<()> {
    match counts.iter().position(|&c| c == 0) {
        Some(c) => Err(Error::EmptyClass(c.to_string())),
        None => Ok(()),
    }
}

/// Fits a model. Deterministic: none of the learners draw random numbers.
pub fn train(spec: &ModelSpec, x: &[Vec<f64>], y: &[usize], n_classes: usize) -> Result<Model> {
    let dim = check_rows(x, y, n_classes)?;
    let counts = class_counts(y, n_classes);
    Ok(match spec.kind {
        ModelKind::ZeroR => {
            let c: Vec<f64> = counts.iter().map(|&c| c as f64).collect();
            Model::ZeroR {
                dim,
                class: argmax(&c),
            }
        }
        ModelKind::Knn => Model::Knn {
            k: spec.knn_k.max(1),
            rows: x.to_vec(),
            labels: y.to_vec(),
            n_classes,
        },
        ModelKind::Cart => Model::Cart {
            dim,
            nodes: cart::build(
                x,
                y,
                n_classes,
                spec.cart_max_depth,
                spec.cart_min_leaf.max(1),
            ),
        },
        ModelKind::NaiveBayes => {
            require_all_classes(&counts)?;
            fit_naive_bayes(x, y, &counts, spec.nb_var_floor)
        }
        ModelKind::Lda => {
            require_all_classes(&counts)?;
            fit_lda(x, y, &counts, spec.lda_ridge)?
        }
        ModelKind::Logistic => logistic::fit(x, y, n_classes, spec),
    })
}

impl Model {
    pub fn dim(&self) -> usize {
        match self {
            Model::ZeroR { dim, .. } | Model::Cart { dim, .. } | Model::Logistic { dim, .. } => {
                *dim
            }
            Model::Knn { rows, .. } => rows[0].len(),
            Model::NaiveBayes { means, .. } => means[0].len(),
            Model::Lda { coef, .. } => coef[0].len(),
        }
    }

    pub fn predict(&self, rows: &[Vec<f64>]) -> Result<Vec<usize>> {
        let dim = self.dim();
        if let Some(bad) = rows.iter().find(|r| r.len() != dim) {
            return Err(Error::DimensionMismatch {
                expected: dim,
                found: bad.len(),
            });
        }
        Ok(rows.iter().map(|r| self.predict_one(r)).collect())
    }

    fn predict_one(&self, x: &[f64]) -> usize {
        match self {
            Model::ZeroR { class, .. } => *class,
            Model::Knn {
                k,
                rows,
                labels,
                n_classes,
            } => knn_vote(*k, rows, labels, *n_classes, x),
            Model::Cart { nodes, .. } => cart::predict(nodes, x),
            Model::NaiveBayes {
                log_priors,
                means,
                vars,
            } => {
                let scores: Vec<f64> = (0..log_priors.len())
                    .map(|c| {
                        let ll: f64 = x
                            .iter()
                            .zip(&means[c])
                            .zip(&vars[c])
                            .map(|((v, m), s2)| {
                                -0.5 * (2.0 * std::f64::consts::PI * s2).ln()
                                    - (v - m).powi(2) / (2.0 * s2)
                            })
                            .sum();
                        log_priors[c] + ll
                    })
                    .collect();
                argmax(&scores)
            }
            Model::Logistic { weights, .. } => {
                let z: Vec<f64> = weights.iter().map(|w| logistic::linear(w, x)).collect();
                argmax(&z)
            }
            Model::Lda { coef, intercept } => {
                let scores: Vec<f64> = coef
                    .iter()
                    .zip(intercept)
                    .map(|(w, b)| b + w.iter().zip(x).map(|(a, v)| a * v).sum::<f64>())
                    .collect();
                argmax(&scores)
            }
        }
    }
}

/// Majority vote over the `k` nearest rows (Euclidean; equal distances go
/// to the lower row index). A tied vote goes to the tied class whose member
/// is nearest.
fn knn_vote(k: usize, rows: &[Vec<f64>], labels: &[usize], n_classes: usize, x: &[f64]) -> usize {
    let mut dist: Vec<(f64, usize)> = rows
        .iter()
        .enumerate()
        .map(|(i, r)| {
            (
                r.iter().zip(x).map(|(a, b)| (a - b).powi(2)).sum::<f64>(),
                i,
            )
        })
        .collect();
    dist.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
    let neighbours = &dist[..k.min(dist.len())];
    let mut votes = vec![0usize; n_classes];
    for &(_, i) in neighbours {
        votes[labels[i]] += 1;
    }
    let top = *votes.iter().max().expect("classes");
    neighbours
        .iter()
        .map(|&(_, i)| labels[i])
        .find(|&c| votes[c] == top)
        .expect("a neighbour holds the top vote")
}

fn fit_naive_bayes(x: &[Vec<f64>], y: &[usize], counts: &[usize], floor: f64) -> Model {
    let dim = x[0].len();
    let k = counts.len();
    let n = x.len() as f64;
    let mut means = vec![vec![0.0; dim]; k];
    for (row, &c) in x.iter().zip(y) {
        for (m, v) in means[c].iter_mut().zip(row) {
            *m += v;
        }
    }
    for (c, m) in means.iter_mut().enumerate() {
        m.iter_mut().for_each(|v| *v /= counts[c] as f64);
    }
    let mut vars = vec![vec![0.0; dim]; k];
    for (row, &c) in x.iter().zip(y) {
        for j in 0..dim {
            vars[c][j] += (row[j] - means[c][j]).powi(2);
        }
    }
    for (c, v) in vars.iter_mut().enumerate() {
        v.iter_mut()
            .for_each(|s| *s = (*s / counts[c] as f64).max(floor));
    }
    Model::NaiveBayes {
        log_priors: counts.iter().map(|&c| (c as f64 / n).ln()).collect(),
        means,
        vars,
    }
}

/// Linear discriminant analysis with a shared pooled covariance
/// `Σ + λI`, `λ = ridge · trace(Σ) / d`.
fn fit_lda(x: &[Vec<f64>], y: &[usize], counts: &[usize], ridge: f64) -> Result<Model> {
    let dim = x[0].len();
    let k = counts.len();
    let n = x.len();
    let mut means = vec![vec![0.0; dim]; k];
    for (row, &c) in x.iter().zip(y) {
        for (m, v) in means[c].iter_mut().zip(row) {
            *m += v;
        }
    }
    for (c, m) in means.iter_mut().enumerate() {
        m.iter_mut().for_each(|v| *v /= counts[c] as f64);
    }
    let mut cov = SquareMatrix::zeros(dim);
    for (row, &c) in x.iter().zip(y) {
        let d: Vec<f64> = row.iter().zip(&means[c]).map(|(v, m)| v - m).collect();
        for i in 0..dim {
            for j in 0..dim {
                cov.add(i, j, d[i] * d[j]);
            }
        }
    }
    let denom = n.saturating_sub(k).max(1) as f64;
    cov.data.iter_mut().for_each(|v| *v /= denom);
    // A zero trace (every feature constant) still needs a positive ridge.
    let lambda = (ridge * cov.trace() / dim as f64).max(f64::MIN_POSITIVE.sqrt());
    for i in 0..dim {
        cov.add(i, i, lambda);
    }
    let chol = Cholesky::new(&cov)
        .ok_or_else(|| Error::InvalidInput("pooled covariance is not positive definite".into()))?;
    let mut coef = Vec::with_capacity(k);
    let mut intercept = Vec::with_capacity(k);
    for c in 0..k {
        let w = chol.solve(&means[c]);
        let b = -0.5 * w.iter().zip(&means[c]).map(|(a, m)| a * m).sum::<f64>()
            + (counts[c] as f64 / n as f64).ln();
        coef.push(w);
        intercept.push(b);
    }
    Ok(Model::Lda { coef, intercept })
}

pub mod cart {
    //! Gini-impurity classification tree.

    use super::{argmax, CartNode};

    fn gini(counts: &[usize], n: usize) -> f64 {
        if n == 0 {
            return 0.0;
        }
        let n = n as f64;
        1.0 - counts.iter().map(|&c| (c as f64 / n).powi(2)).sum::<f64>()
    }

    fn majority(counts: &[usize]) -> usize {
        let c: Vec<f64> = counts.iter().map(|&c| c as f64).collect();
        argmax(&c)
    }

    pub fn build(
        x: &[Vec<f64>],
        y: &[usize],
        n_classes: usize,
        max_depth: usize,
        min_leaf: usize,
    ) -> Vec<CartNode> {
        let mut nodes = Vec::new();
        let idx: Vec<usize> = (0..x.len()).collect();
        grow(x, y, n_classes, max_depth, min_leaf, idx, 0, &mut nodes);
        nodes
    }

    #[allow(clippy::too_many_arguments)]
    fn grow(
        x: &[Vec<f64>],
        y: &[usize],
        n_classes: usize,
        max_depth: usize,
        min_leaf: usize,
        idx: Vec<usize>,
        depth: usize,
        nodes: &mut Vec<CartNode>,
    ) -> usize {
        let mut counts = vec![0usize; n_classes];
        for &i in &idx {
            counts[y[i]] += 1;
        }
        let me = nodes.len();
        nodes.push(CartNode::Leaf {
            class: majority(&counts),
        });
        let parent = gini(&counts, idx.len());
        if depth >= max_depth || parent == 0.0 || idx.len() < 2 * min_leaf {
            return me;
        }
        let Some((feature, threshold)) = best_split(x, y, n_classes, min_leaf, &idx, parent) else {
            return me;
        };
        let (l, r): (Vec<usize>, Vec<usize>) =
            idx.into_iter().partition(|&i| x[i][feature] <= threshold);
        let left = grow(x, y, n_classes, max_depth, min_leaf, l, depth + 1, nodes);
        let right = grow(x, y, n_classes, max_depth, min_leaf, r, depth + 1, nodes);
        nodes[me] = CartNode::Split {
            feature,
            threshold,
            left,
            right,
        };
        me
    }

    fn best_split(
        x: &[Vec<f64>],
        y: &[usize],
        n_classes: usize,
        min_leaf: usize,
        idx: &[usize],
        parent: f64,
    ) -> Option<(usize, f64)> {
        let n = idx.len();
        let mut best: Option<(f64, usize, f64)> = None;
        let mut order = idx.to_vec();
        for f in 0..x[0].len() {
            order.sort_by(|&a, &b| x[a][f].total_cmp(&x[b][f]).then(a.cmp(&b)));
            let mut left = vec![0usize; n_classes];
            let mut right = vec![0usize; n_classes];
            for &i in &order {
                right[y[i]] += 1;
            }
            for pos in 0..n - 1 {
                let i = order[pos];
                left[y[i]] += 1;
                right[y[i]] -= 1;
                let nl = pos + 1;
                let (v, next) = (x[i][f], x[order[pos + 1]][f]);
                if v == next || nl < min_leaf || n - nl < min_leaf {
                    continue;
                }
                let score = (nl as f64 * gini(&left, nl) + (n - nl) as f64 * gini(&right, n - nl))
                    / n as f64;
                if score < parent - 1e-12 && best.is_none_or(|b| score < b.0) {
                    best = Some((score, f, v + (next - v) / 2.0));
                }
            }
        }
        best.map(|(_, f, t)| (f, t))
    }

    pub fn predict(nodes: &[CartNode], x: &[f64]) -> usize {
        let mut at = 0;
        loop {
            match &nodes[at] {
                CartNode::Leaf { class } => return *class,
                CartNode::Split {
                    feature,
                    threshold,
                    left,
                    right,
                } => {
                    at = if x[*feature] <= *threshold {
                        *left
                    } else {
                        *right
                    }
                }
            }
        }
    }
}

pub mod logistic {
    //! Multinomial logistic regression with an L2 penalty on the weights
    //! (not the biases), fitted by gradient descent with Barzilai-Borwein
    //! steps and a non-monotone Armijo safeguard.

    use super::{Model, ModelSpec};

    #[inline]
    pub fn linear(w: &[f64], x: &[f64]) -> f64 {
        w[0] + w[1..].iter().zip(x).map(|(a, b)| a * b).sum::<f64>()
    }

    /// Objective `(1/n) Σ CE + (l2 / 2n) ‖W‖²` and its gradient, with `w`
    /// flattened row-major as `n_classes × (dim + 1)`.
    pub fn objective_and_gradient(
        w: &[f64],
        x: &[Vec<f64>],
        y: &[usize],
        n_classes: usize,
        l2: f64,
    ) -> (f64, Vec<f64>) {
        let dim = x[0].len();
        let stride = dim + 1;
        let n = x.len() as f64;
        let mut grad = vec![0.0; w.len()];
        let mut loss = 0.0;
        let mut z = vec![0.0; n_classes];
        for (row, &label) in x.iter().zip(y) {
            for c in 0..n_classes {
                z[c] = linear(&w[c * stride..(c + 1) * stride], row);
            }
            let m = z.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
            let sum: f64 = z.iter().map(|v| (v - m).exp()).sum();
            let lse = m + sum.ln();
            loss += lse - z[label];
            for c in 0..n_classes {
                let p = (z[c] - lse).exp() - if c == label { 1.0 } else { 0.0 };
                let g = &mut grad[c * stride..(c + 1) * stride];
                g[0] += p;
                for (gj, v) in g[1..].iter_mut().zip(row) {
                    *gj += p * v;
                }
            }
        }
        let mut penalty = 0.0;
        for c in 0..n_classes {
            for j in 1..stride {
                let v = w[c * stride + j];
                penalty += v * v;
                grad[c * stride + j] += l2 * v;
            }
        }
        grad.iter_mut().for_each(|g| *g /= n);
        ((loss + 0.5 * l2 * penalty) / n, grad)
    }

    fn norm(v: &[f64]) -> f64 {
        v.iter().map(|x| x * x).sum::<f64>().sqrt()
    }

    pub fn fit(x: &[Vec<f64>], y: &[usize], n_classes: usize, spec: &ModelSpec) -> Model {
        const MEMORY: usize = 10;
        let dim = x[0].len();
        let mut w = vec![0.0; n_classes * (dim + 1)];
        let (mut f, mut g) = objective_and_gradient(&w, x, y, n_classes, spec.logistic_l2);
        let mut history = vec![f];
        let mut step = 1.0;
        let mut iterations = 0;
        while iterations < spec.logistic_max_iter && norm(&g) >= spec.logistic_tol {
            iterations += 1;
            let gg: f64 = g.iter().map(|v| v * v).sum();
            let reference = history.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
            let (w_new, f_new, g_new) = loop {
                let cand: Vec<f64> = w.iter().zip(&g).map(|(a, b)| a - step * b).collect();
                let (fc, gc) = objective_and_gradient(&cand, x, y, n_classes, spec.logistic_l2);
                if fc <= reference - 1e-4 * step * gg || step < 1e-12 {
                    break (cand, fc, gc);
                }
                step *= 0.5;
            };
            let s: Vec<f64> = w_new.iter().zip(&w).map(|(a, b)| a - b).collect();
            let d: Vec<f64> = g_new.iter().zip(&g).map(|(a, b)| a - b).collect();
            let sy: f64 = s.iter().zip(&d).map(|(a, b)| a * b).sum();
            let ss: f64 = s.iter().map(|v| v * v).sum();
            step = if sy > 0.0 {
                (ss / sy).clamp(1e-10, 1e10)
            } else {
                1.0
            };
            w = w_new;
            f = f_new;
            g = g_new;
            history.push(f);
            if history.len() > MEMORY {
                history.remove(0);
            }
        }
        Model::Logistic {
            dim,
            weights: w.chunks(dim + 1).map(<[f64]>::to_vec).collect(),
            iterations,
            grad_norm: norm(&g),
        }
    }
}
