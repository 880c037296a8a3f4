//! Multi-class gradient boosting on the softmax cross-entropy loss.
//!
//! Scores start at the log class priors. Every iteration computes the
//! softmax probabilities, fits one regression tree per class to the residuals
//! `1[y = k] - p_k`, sets each leaf to the K-class Newton step
//! `(K-1)/K * Σr / Σ|r|(1-|r|)` and adds the shrunken tree output.

mod tree;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::ingest::ClassLabel;
use crate::sparse::{SparseRealMatrix, SparseRow};

pub use tree::{split_search, FeatureColumns, Node, RegressionTree, Split, MIN_GAIN};

/// Leaf denominators below this produce a zero leaf.
const LEAF_EPS: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GbdtHyperparams {
    pub n_iterations: usize,
    pub learning_rate: f64,
    pub max_depth: usize,
    pub min_samples_leaf: usize,
    pub seed: u64,
}

impl Default for GbdtHyperparams {
    fn default() -> Self {
        GbdtHyperparams {
            n_iterations: 100,
            learning_rate: 0.1,
            max_depth: 3,
            min_samples_leaf: 2,
            seed: 0,
        }
    }
}

impl GbdtHyperparams {
    pub fn validate(&self) -> Result<()> {
        if self.n_iterations < 1 {
            return Err(Error::InvalidArgument("n_iterations must be >= 1".into()));
        }
        if !(self.learning_rate > 0.0 && self.learning_rate <= 1.0) {
            return Err(Error::InvalidArgument(format!(
                "learning_rate must lie in (0, 1], got {}",
                self.learning_rate
            )));
        }
        if self.max_depth < 1 {
            return Err(Error::InvalidArgument("max_depth must be >= 1".into()));
        }
        if self.min_samples_leaf < 1 {
            return Err(Error::InvalidArgument("min_samples_leaf must be >= 1".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GbdtModel {
    pub class_labels: Vec<ClassLabel>,
    pub initial_scores: Vec<f64>,
    /// `trees[m][k]` is iteration `m`'s tree for class `k`.
    pub trees: Vec<Vec<RegressionTree>>,
    pub learning_rate: f64,
    pub n_features: usize,
}

/// Training log-loss after each iteration; entry 0 is the prior model.
#[derive(Debug, Clone, PartialEq)]
pub struct FitTrace {
    pub log_loss: Vec<f64>,
}

pub fn softmax(scores: &[f64]) -> Vec<f64> {
    let max = scores.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let exps: Vec<f64> = scores.iter().map(|s| (s - max).exp()).collect();
    let total: f64 = exps.iter().sum();
    exps.into_iter().map(|e| e / total).collect()
}

/// `-ln softmax(scores)[label]`, computed through log-sum-exp.
pub fn cross_entropy(scores: &[f64], label: usize) -> f64 {
    let max = scores.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let lse = max + scores.iter().map(|s| (s - max).exp()).sum::<f64>().ln();
    lse - scores[label]
}

/// Negative gradient of [`cross_entropy`] with respect to the scores:
/// `1[k = label] - softmax(scores)[k]`.
pub fn residuals(scores: &[f64], label: usize) -> Vec<f64> {
    let mut r = softmax(scores);
    for (k, v) in r.iter_mut().enumerate() {
        *v = indicator(k == label) - *v;
    }
    r
}

/// Index of the largest value; the first one wins ties.
pub fn argmax(values: &[f64]) -> usize {
    let mut best = 0;
    for (i, &v) in values.iter().enumerate() {
        if v > values[best] {
            best = i;
        }
    }
    best
}

pub fn fit(x: &SparseRealMatrix, y: &[usize], labels: &[ClassLabel], hp: &GbdtHyperparams) -> Result<GbdtModel> {
    fit_traced(x, y, labels, hp).map(|(m, _)| m)
}

pub fn fit_traced(
    x: &SparseRealMatrix,
    y: &[usize],
    labels: &[ClassLabel],
    hp: &GbdtHyperparams,
) -> Result<(GbdtModel, FitTrace)> {
    hp.validate()?;
    let n = x.n_rows();
    let k = labels.len();
    if n == 0 {
        return Err(Error::Empty("no training rows".into()));
    }
    if y.len() != n {
        return Err(Error::DimensionMismatch {
            context: "gbdt labels".into(),
            expected: n,
            found: y.len(),
        });
    }
    let mut class_counts = vec![0usize; k];
    for &c in y {
        if c >= k {
            return Err(Error::InvalidArgument(format!("class index {c} >= {k}")));
        }
        class_counts[c] += 1;
    }
    let present = class_counts.iter().filter(|&&c| c > 0).count();
    if k < 2 || present < 2 {
        return Err(Error::SingleClass(present));
    }
    if let Some(c) = class_counts.iter().position(|&c| c == 0) {
        return Err(Error::ClassTooSmall {
            class: labels[c].to_string(),
            count: 0,
            required: 1,
        });
    }
    if n < 2 * hp.min_samples_leaf {
        return Err(Error::InvalidArgument(format!(
            "{n} rows is fewer than 2 * min_samples_leaf = {}",
            2 * hp.min_samples_leaf
        )));
    }

    let initial_scores: Vec<f64> = class_counts.iter().map(|&c| (c as f64 / n as f64).ln()).collect();
    let mut scores: Vec<Vec<f64>> = vec![initial_scores.clone(); n];
    let columns = FeatureColumns::new(x);
    let params = tree::TreeParams {
        max_depth: hp.max_depth,
        min_samples_leaf: hp.min_samples_leaf,
    };
    let leaf_scale = (k as f64 - 1.0) / k as f64;

    let mut trees = Vec::with_capacity(hp.n_iterations);
    let mut log_loss = Vec::with_capacity(hp.n_iterations + 1);
    log_loss.push(mean_log_loss(&scores, y));
    for _ in 0..hp.n_iterations {
        let grads: Vec<Vec<f64>> = scores.iter().zip(y).map(|(s, &c)| residuals(s, c)).collect();
        let round: Vec<RegressionTree> = (0..k)
            .into_par_iter()
            .map(|class| {
                let residuals: Vec<f64> = grads.iter().map(|g| g[class]).collect();
                tree::grow_tree(x, &columns, &residuals, &params, |rows| {
                    let num: f64 = rows.iter().map(|&i| residuals[i]).sum();
                    let den: f64 = rows
                        .iter()
                        .map(|&i| {
                            let a = residuals[i].abs();
                            a * (1.0 - a)
                        })
                        .sum();
                    if den < LEAF_EPS {
                        0.0
                    } else {
                        leaf_scale * num / den
                    }
                })
            })
            .collect();
        for (i, s) in scores.iter_mut().enumerate() {
            let row = x.row(i);
            for (class, t) in round.iter().enumerate() {
                s[class] += hp.learning_rate * t.predict(&row);
            }
        }
        trees.push(round);
        log_loss.push(mean_log_loss(&scores, y));
    }

    Ok((
        GbdtModel {
            class_labels: labels.to_vec(),
            initial_scores,
            trees,
            learning_rate: hp.learning_rate,
            n_features: x.n_cols(),
        },
        FitTrace { log_loss },
    ))
}

fn indicator(b: bool) -> f64 {
    if b {
        1.0
    } else {
        0.0
    }
}

fn mean_log_loss(scores: &[Vec<f64>], y: &[usize]) -> f64 {
    scores.iter().zip(y).map(|(s, &c)| cross_entropy(s, c)).sum::<f64>() / y.len() as f64
}

impl GbdtModel {
    pub fn n_classes(&self) -> usize {
        self.class_labels.len()
    }

    pub fn predict_scores(&self, row: &SparseRow<'_, f64>) -> Result<Vec<f64>> {
        if row.n_cols != self.n_features {
            return Err(Error::DimensionMismatch {
                context: "gbdt input features".into(),
                expected: self.n_features,
                found: row.n_cols,
            });
        }
        let mut scores = self.initial_scores.clone();
        for round in &self.trees {
            for (s, t) in scores.iter_mut().zip(round) {
                *s += self.learning_rate * t.predict(row);
            }
        }
        Ok(scores)
    }

    pub fn predict_proba(&self, row: &SparseRow<'_, f64>) -> Result<Vec<f64>> {
        Ok(softmax(&self.predict_scores(row)?))
    }

    pub fn predict_index(&self, row: &SparseRow<'_, f64>) -> Result<usize> {
        Ok(argmax(&self.predict_proba(row)?))
    }

    pub fn predict(&self, row: &SparseRow<'_, f64>) -> Result<&ClassLabel> {
        Ok(&self.class_labels[self.predict_index(row)?])
    }

    /// Prior-only prediction used for inputs with no usable features.
    pub fn prior_proba(&self) -> Vec<f64> {
        softmax(&self.initial_scores)
    }

    pub fn log_loss(&self, x: &SparseRealMatrix, y: &[usize]) -> Result<f64> {
        let mut total = 0.0;
        for (row, &c) in x.rows().zip(y) {
            total += cross_entropy(&self.predict_scores(&row)?, c);
        }
        Ok(total / y.len() as f64)
    }

    pub fn validate(&self) -> Result<()> {
        let k = self.class_labels.len();
        let bad = |field: &str, m: String| Err(Error::InvalidBundle {
            field: format!("gbdt.{field}"),
            message: m,
        });
        if k < 2 {
            return bad("class_labels", format!("{k} classes"));
        }
        if self.initial_scores.len() != k {
            return bad("initial_scores", format!("length {} for {k} classes", self.initial_scores.len()));
        }
        if self.initial_scores.iter().any(|s| !s.is_finite()) {
            return bad("initial_scores", "non-finite score".into());
        }
        if !(self.learning_rate > 0.0 && self.learning_rate <= 1.0) {
            return bad("learning_rate", format!("{} outside (0, 1]", self.learning_rate));
        }
        for (m, round) in self.trees.iter().enumerate() {
            if round.len() != k {
                return bad("trees", format!("iteration {m} has {} trees for {k} classes", round.len()));
            }
            for t in round {
                t.validate(self.n_features)?;
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sparse::CsrMatrix;
    use rand::{Rng, SeedableRng};

    fn labels(k: usize) -> Vec<ClassLabel> {
        (0..k).map(|i| ClassLabel::new(format!("c{i}"))).collect()
    }

    fn dense(rows: &[Vec<f64>]) -> SparseRealMatrix {
        CsrMatrix::from_dense(rows, rows[0].len()).unwrap()
    }

    #[test]
    fn softmax_examples() {
        let p = softmax(&[0.0, 0.0, 0.0]);
        assert!(p.iter().all(|&v| (v - 1.0 / 3.0).abs() < 1e-15));
        let c = 4.2;
        let p = softmax(&[c, c + 2f64.ln()]);
        assert!((p[0] - 1.0 / 3.0).abs() < 1e-12 && (p[1] - 2.0 / 3.0).abs() < 1e-12);
        let p = softmax(&[1000.0, 0.0]);
        assert!(p.iter().all(|v| v.is_finite()));
        assert!((p[0] - 1.0).abs() < 1e-12 && p[1] < 1e-300);
    }

    #[test]
    fn balanced_prior() {
        let x = dense(&[vec![1.0], vec![2.0], vec![3.0], vec![4.0], vec![5.0], vec![6.0]]);
        let hp = GbdtHyperparams {
            n_iterations: 1,
            min_samples_leaf: 1,
            ..Default::default()
        };
        let m = fit(&x, &[0, 0, 1, 1, 2, 2], &labels(3), &hp).unwrap();
        for s in &m.initial_scores {
            assert!((s - (1.0f64 / 3.0).ln()).abs() < 1e-15);
            assert!((s + 1.0986).abs() < 1e-4);
        }
    }

    /// One iteration with stumps on x = (1, 2, 3, 4), y = (0, 0, 1, 1).
    ///
    /// Prior scores are ln(1/2) for both classes, so p = (1/2, 1/2) and the
    /// class-0 residuals are (1/2, 1/2, -1/2, -1/2). The best stump cuts at 2.5.
    /// Left leaf: (K-1)/K * Σr / Σ|r|(1-|r|) = 1/2 * 1 / (2 * 1/4) = 1, right
    /// leaf = -1. Class 1 mirrors it: left -1, right +1.
    #[test]
    fn hand_traced_single_iteration() {
        let x = dense(&[vec![1.0], vec![2.0], vec![3.0], vec![4.0]]);
        let hp = GbdtHyperparams {
            n_iterations: 1,
            learning_rate: 0.1,
            max_depth: 1,
            min_samples_leaf: 1,
            seed: 0,
        };
        let m = fit(&x, &[0, 0, 1, 1], &labels(2), &hp).unwrap();
        let expect = |t: &RegressionTree, l: f64, r: f64| {
            assert_eq!(
                t.nodes,
                vec![
                    Node::Split {
                        feature: 0,
                        threshold: 2.5,
                        left: 1,
                        right: 2
                    },
                    Node::Leaf { value: l },
                    Node::Leaf { value: r },
                ]
            );
        };
        expect(&m.trees[0][0], 1.0, -1.0);
        expect(&m.trees[0][1], -1.0, 1.0);
        let s = m.predict_scores(&x.row(0)).unwrap();
        assert!((s[0] - (0.5f64.ln() + 0.1)).abs() < 1e-15);
        assert!((s[1] - (0.5f64.ln() - 0.1)).abs() < 1e-15);
    }

    fn stump(l: f64, r: f64) -> RegressionTree {
        RegressionTree {
            nodes: vec![
                Node::Split {
                    feature: 0,
                    threshold: 0.5,
                    left: 1,
                    right: 2,
                },
                Node::Leaf { value: l },
                Node::Leaf { value: r },
            ],
        }
    }

    #[test]
    fn predict_scores_by_hand() {
        let zero = GbdtModel {
            class_labels: labels(2),
            initial_scores: vec![-0.3, -1.2],
            trees: vec![],
            learning_rate: 0.1,
            n_features: 1,
        };
        let x = dense(&[vec![0.0], vec![1.0]]);
        assert_eq!(zero.predict_scores(&x.row(0)).unwrap(), vec![-0.3, -1.2]);

        let one = GbdtModel {
            trees: vec![vec![stump(1.0, 0.0), stump(-1.0, 0.0)]],
            ..zero.clone()
        };
        assert_eq!(one.predict_scores(&x.row(0)).unwrap(), vec![-0.3 + 0.1, -1.2 - 0.1]);
        assert_eq!(one.predict_scores(&x.row(1)).unwrap(), vec![-0.3, -1.2]);

        let two = GbdtModel {
            trees: vec![vec![stump(1.0, 0.0), stump(-1.0, 0.0)], vec![stump(0.0, 2.0), stump(0.5, -3.0)]],
            ..zero.clone()
        };
        // row 1 (x = 1) goes right at every split: 0 then 2 / 0 then -3
        let s = two.predict_scores(&x.row(1)).unwrap();
        assert!((s[0] - (-0.3 + 0.1 * 2.0)).abs() < 1e-15);
        assert!((s[1] - (-1.2 - 0.1 * 3.0)).abs() < 1e-15);
        assert!(two.predict_scores(&dense(&[vec![0.0, 1.0]]).row(0)).is_err());
    }

    #[test]
    fn uniform_prior_predicts_first_label() {
        let m = GbdtModel {
            class_labels: labels(3),
            initial_scores: vec![(1.0f64 / 3.0).ln(); 3],
            trees: vec![],
            learning_rate: 0.1,
            n_features: 2,
        };
        let x = dense(&[vec![0.3, 0.0]]);
        let p = m.predict_proba(&x.row(0)).unwrap();
        assert!(p.iter().all(|&v| (v - 1.0 / 3.0).abs() < 1e-15));
        assert_eq!(m.predict(&x.row(0)).unwrap().as_str(), "c0");
    }

    #[test]
    fn fit_input_errors() {
        let x = dense(&[vec![1.0], vec![2.0], vec![3.0], vec![4.0]]);
        let hp = GbdtHyperparams::default();
        assert!(matches!(fit(&x, &[0, 0, 0, 0], &labels(2), &hp), Err(Error::SingleClass(1))));
        assert!(matches!(fit(&SparseRealMatrix::empty(1), &[], &labels(2), &hp), Err(Error::Empty(_))));
        assert!(fit(&x, &[0, 1, 0, 1], &labels(3), &hp).is_err());
        let bad = GbdtHyperparams {
            learning_rate: 0.0,
            ..hp
        };
        assert!(fit(&x, &[0, 1, 0, 1], &labels(2), &bad).is_err());
        let big_leaf = GbdtHyperparams {
            min_samples_leaf: 3,
            ..hp
        };
        assert!(fit(&x, &[0, 1, 0, 1], &labels(2), &big_leaf).is_err());
    }

    #[test]
    fn residual_is_negative_gradient() {
        let mut rng = rand::rngs::StdRng::seed_from_u64(1);
        for _ in 0..100 {
            let k = rng.gen_range(2..6);
            let f: Vec<f64> = (0..k).map(|_| rng.gen_range(-3.0..3.0)).collect();
            let y = rng.gen_range(0..k);
            let p = softmax(&f);
            for j in 0..k {
                let h = 1e-6;
                let mut plus = f.clone();
                plus[j] += h;
                let mut minus = f.clone();
                minus[j] -= h;
                let grad = (cross_entropy(&plus, y) - cross_entropy(&minus, y)) / (2.0 * h);
                let residual = indicator(y == j) - p[j];
                let rel = (residual + grad).abs() / residual.abs().max(1e-8);
                assert!(rel <= 1e-5, "rel error {rel}");
            }
        }
    }

    #[test]
    fn deterministic_fit() {
        let mut rng = rand::rngs::StdRng::seed_from_u64(8);
        let rows: Vec<Vec<f64>> = (0..30)
            .map(|_| (0..4).map(|_| if rng.gen_bool(0.5) { 0.0 } else { rng.gen_range(0.0..1.0) }).collect())
            .collect();
        let y: Vec<usize> = (0..30).map(|i| i % 3).collect();
        let x = dense(&rows);
        let hp = GbdtHyperparams {
            n_iterations: 10,
            ..Default::default()
        };
        let a = fit(&x, &y, &labels(3), &hp).unwrap();
        let b = fit(&x, &y, &labels(3), &hp).unwrap();
        assert_eq!(serde_json::to_string(&a).unwrap(), serde_json::to_string(&b).unwrap());
        a.validate().unwrap();
        assert!(a.trees.iter().flatten().all(|t| t.depth() <= 3));
    }

    #[test]
    fn probabilities_sum_to_one_and_predict_is_argmax() {
        let mut rng = rand::rngs::StdRng::seed_from_u64(21);
        let rows: Vec<Vec<f64>> = (0..60).map(|_| (0..3).map(|_| rng.gen_range(0.0..1.0)).collect()).collect();
        let y: Vec<usize> = rows.iter().map(|r| if r[0] > 0.6 { 0 } else if r[1] > 0.5 { 1 } else { 2 }).collect();
        let m = fit(&dense(&rows), &y, &labels(3), &GbdtHyperparams {
            n_iterations: 20,
            ..Default::default()
        })
        .unwrap();
        let probe: Vec<Vec<f64>> = (0..1000)
            .map(|_| (0..3).map(|_| if rng.gen_bool(0.2) { 0.0 } else { rng.gen_range(-0.5..1.5) }).collect())
            .collect();
        let probe = dense(&probe);
        for row in probe.rows() {
            let p = m.predict_proba(&row).unwrap();
            assert!((p.iter().sum::<f64>() - 1.0).abs() <= 1e-9);
            let mut best = 0;
            for j in 1..p.len() {
                if p[j] > p[best] {
                    best = j;
                }
            }
            assert_eq!(m.predict(&row).unwrap(), &m.class_labels[best]);
        }
    }

    #[test]
    fn shifting_initial_scores_keeps_predictions() {
        let mut rng = rand::rngs::StdRng::seed_from_u64(4);
        let rows: Vec<Vec<f64>> = (0..30).map(|_| (0..2).map(|_| rng.gen_range(0.0..1.0)).collect()).collect();
        let y: Vec<usize> = rows.iter().map(|r| usize::from(r[0] > 0.5)).collect();
        let x = dense(&rows);
        let m = fit(&x, &y, &labels(2), &GbdtHyperparams {
            n_iterations: 5,
            ..Default::default()
        })
        .unwrap();
        let mut shifted = m.clone();
        for s in &mut shifted.initial_scores {
            *s += 17.5;
        }
        for row in x.rows() {
            assert_eq!(m.predict(&row).unwrap(), shifted.predict(&row).unwrap());
        }
    }
}
