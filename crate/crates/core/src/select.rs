//! Chi-squared feature scoring and k-best column selection.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::sparse::SparseRealMatrix;

pub const DEFAULT_K: usize = 1000;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Chi2Selector {
    pub scores: Vec<f64>,
    pub selected: Vec<usize>,
    pub k_requested: usize,
}

/// Chi-squared statistic of every column against the class labels.
///
/// Observed mass of column `j` in class `c` is the sum of its values over the
/// rows of `c`; the expected mass splits the column total in proportion to
/// class sizes. Columns with no mass score 0.
pub fn chi2_scores(x: &SparseRealMatrix, y: &[usize], n_classes: usize) -> Result<Vec<f64>> {
    if y.len() != x.n_rows() {
        return Err(Error::DimensionMismatch {
            context: "chi2 labels".into(),
            expected: x.n_rows(),
            found: y.len(),
        });
    }
    let mut class_sizes = vec![0usize; n_classes];
    for &c in y {
        if c >= n_classes {
            return Err(Error::InvalidArgument(format!("class index {c} >= {n_classes}")));
        }
        class_sizes[c] += 1;
    }
    let present = class_sizes.iter().filter(|&&n| n > 0).count();
    if present < 2 {
        return Err(Error::SingleClass(present));
    }

    let v = x.n_cols();
    // observed[c * v + j]
    let mut observed = vec![0.0f64; n_classes * v];
    for (r, row) in x.rows().enumerate() {
        let base = y[r] * v;
        for (j, value) in row.iter() {
            if value < 0.0 {
                return Err(Error::NegativeValue { row: r, col: j, value });
            }
            observed[base + j] += value;
        }
    }
    let n = y.len() as f64;
    let scores = (0..v)
        .map(|j| {
            let total: f64 = (0..n_classes).map(|c| observed[c * v + j]).sum();
            if total == 0.0 {
                return 0.0;
            }
            (0..n_classes)
                .filter(|&c| class_sizes[c] > 0)
                .map(|c| {
                    let expected = total * class_sizes[c] as f64 / n;
                    let diff = observed[c * v + j] - expected;
                    diff * diff / expected
                })
                .sum()
        })
        .collect();
    Ok(scores)
}

/// Indices of the `k` highest scores in increasing index order. Equal scores
/// prefer the lower index.
pub fn select_k_best(scores: &[f64], k: usize) -> Result<Vec<usize>> {
    if k < 1 {
        return Err(Error::InvalidArgument("k must be at least 1".into()));
    }
    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| scores[b].total_cmp(&scores[a]).then(a.cmp(&b)));
    order.truncate(k);
    order.sort_unstable();
    Ok(order)
}

impl Chi2Selector {
    pub fn fit(x: &SparseRealMatrix, y: &[usize], n_classes: usize, k: usize) -> Result<Self> {
        let scores = chi2_scores(x, y, n_classes)?;
        let selected = select_k_best(&scores, k)?;
        Ok(Chi2Selector {
            scores,
            selected,
            k_requested: k,
        })
    }

    pub fn n_input_features(&self) -> usize {
        self.scores.len()
    }

    pub fn k_effective(&self) -> usize {
        self.selected.len()
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::InvalidBundle {
            field: "selector".into(),
            message: m.into(),
        });
        if self.selected.len() != self.k_requested.min(self.scores.len()) {
            return bad("selected length is not min(k, V)");
        }
        if self.selected.windows(2).any(|w| w[0] >= w[1]) {
            return bad("selected indices not strictly increasing");
        }
        if self.selected.last().is_some_and(|&j| j >= self.scores.len()) {
            return bad("selected index out of range");
        }
        if self.scores.iter().any(|s| !(*s >= 0.0)) {
            return bad("negative or NaN score");
        }
        Ok(())
    }

    pub fn apply(&self, x: &SparseRealMatrix) -> Result<SparseRealMatrix> {
        apply_selection(x, self)
    }
}

pub fn apply_selection(x: &SparseRealMatrix, selector: &Chi2Selector) -> Result<SparseRealMatrix> {
    if x.n_cols() != selector.scores.len() {
        return Err(Error::DimensionMismatch {
            context: "feature selection input columns".into(),
            expected: selector.scores.len(),
            found: x.n_cols(),
        });
    }
    x.select_columns(&selector.selected)
}
