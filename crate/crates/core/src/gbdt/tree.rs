//! Regression trees grown by exact greedy variance reduction.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::sparse::{SparseRealMatrix, SparseRow};

/// Splits whose gain does not exceed this are treated as no split; it only
/// absorbs rounding noise in the sums.
pub const MIN_GAIN: f64 = 1e-14;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Node {
    /// Rows with `x[feature] <= threshold` go left; absent entries read as 0.
    Split {
        feature: usize,
        threshold: f64,
        left: usize,
        right: usize,
    },
    Leaf { value: f64 },
}

/// Flat node arena; the root is node 0 and children always follow their parent.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RegressionTree {
    pub nodes: Vec<Node>,
}

impl RegressionTree {
    pub fn leaf(value: f64) -> Self {
        RegressionTree {
            nodes: vec![Node::Leaf { value }],
        }
    }

    pub fn predict(&self, row: &SparseRow<'_, f64>) -> f64 {
        let mut at = 0;
        loop {
            match self.nodes[at] {
                Node::Leaf { value } => return value,
                Node::Split {
                    feature,
                    threshold,
                    left,
                    right,
                } => at = if row.get(feature) <= threshold { left } else { right },
            }
        }
    }

    pub fn depth(&self) -> usize {
        fn walk(nodes: &[Node], at: usize) -> usize {
            match nodes[at] {
                Node::Leaf { .. } => 0,
                Node::Split { left, right, .. } => 1 + walk(nodes, left).max(walk(nodes, right)),
            }
        }
        walk(&self.nodes, 0)
    }

    /// Structural check used when loading persisted models.
    pub fn validate(&self, n_features: usize) -> Result<()> {
        let bad = |m: String| Err(Error::InvalidBundle {
            field: "gbdt.trees".into(),
            message: m,
        });
        if self.nodes.is_empty() {
            return bad("tree has no nodes".into());
        }
        let mut parents = vec![0usize; self.nodes.len()];
        for (i, node) in self.nodes.iter().enumerate() {
            match *node {
                Node::Leaf { value } if !value.is_finite() => return bad(format!("node {i} leaf is not finite")),
                Node::Leaf { .. } => {}
                Node::Split {
                    feature,
                    threshold,
                    left,
                    right,
                } => {
                    if feature >= n_features {
                        return bad(format!("node {i} splits on feature {feature} >= {n_features}"));
                    }
                    if !threshold.is_finite() {
                        return bad(format!("node {i} threshold is not finite"));
                    }
                    for child in [left, right] {
                        if child <= i || child >= self.nodes.len() {
                            return bad(format!("node {i} has invalid child {child}"));
                        }
                        parents[child] += 1;
                    }
                }
            }
        }
        if parents[0] != 0 || parents[1..].iter().any(|&p| p != 1) {
            return bad("nodes do not form a single binary tree".into());
        }
        Ok(())
    }
}

/// Column-major copy of the nonzero entries, each column sorted by value.
#[derive(Debug, Clone)]
pub struct FeatureColumns {
    n_rows: usize,
    columns: Vec<Vec<(f64, usize)>>,
}

impl FeatureColumns {
    pub fn new(x: &SparseRealMatrix) -> Self {
        let mut columns = vec![Vec::new(); x.n_cols()];
        for (r, row) in x.rows().enumerate() {
            for (c, v) in row.iter() {
                columns[c].push((v, r));
            }
        }
        for col in &mut columns {
            col.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
        }
        FeatureColumns {
            n_rows: x.n_rows(),
            columns,
        }
    }

    pub fn n_features(&self) -> usize {
        self.columns.len()
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Split {
    pub feature: usize,
    pub threshold: f64,
    /// Reduction of the residual variance: `Var(node) - nL/n Var(L) - nR/n Var(R)`.
    pub gain: f64,
}

/// Best variance-reducing split of `rows`, or `None` when nothing reduces it.
///
/// Candidate thresholds are midpoints between consecutive distinct values of a
/// feature inside the node, both sides must keep `min_samples_leaf` rows, and
/// ties go to the lower feature index, then the lower threshold.
pub fn split_search(
    columns: &FeatureColumns,
    residuals: &[f64],
    rows: &[usize],
    min_samples_leaf: usize,
) -> Option<Split> {
    let n = rows.len();
    let min_leaf = min_samples_leaf.max(1);
    if n < 2 * min_leaf {
        return None;
    }
    let mut in_node = vec![false; columns.n_rows];
    for &r in rows {
        in_node[r] = true;
    }
    let total: f64 = rows.iter().map(|&r| residuals[r]).sum();
    let nf = n as f64;
    let parent_term = total * total / nf;

    let mut best: Option<Split> = None;
    let mut groups: Vec<(f64, usize, f64)> = Vec::new();
    for (feature, column) in columns.columns.iter().enumerate() {
        // distinct values in ascending order as (value, count, residual sum),
        // with the implicit zeros slotted between negatives and positives
        groups.clear();
        let mut nz_count = 0;
        let mut nz_sum = 0.0;
        let mut zero_slot = None;
        for &(v, r) in column {
            if !in_node[r] {
                continue;
            }
            if zero_slot.is_none() && v > 0.0 {
                zero_slot = Some(groups.len());
            }
            nz_count += 1;
            nz_sum += residuals[r];
            match groups.last_mut() {
                Some(g) if g.0 == v => {
                    g.1 += 1;
                    g.2 += residuals[r];
                }
                _ => groups.push((v, 1, residuals[r])),
            }
        }
        let zeros = n - nz_count;
        if zeros > 0 {
            let at = zero_slot.unwrap_or(groups.len());
            groups.insert(at, (0.0, zeros, total - nz_sum));
        }
        if groups.len() < 2 {
            continue;
        }

        let mut left_n = 0usize;
        let mut left_sum = 0.0;
        for w in 0..groups.len() - 1 {
            left_n += groups[w].1;
            left_sum += groups[w].2;
            let right_n = n - left_n;
            if left_n < min_leaf {
                continue;
            }
            if right_n < min_leaf {
                break;
            }
            let right_sum = total - left_sum;
            let gain = (left_sum * left_sum / left_n as f64 + right_sum * right_sum / right_n as f64 - parent_term) / nf;
            if gain > MIN_GAIN && best.is_none_or(|b| gain > b.gain) {
                let (a, b) = (groups[w].0, groups[w + 1].0);
                let mid = a + (b - a) / 2.0;
                let threshold = if mid < b { mid } else { a };
                best = Some(Split {
                    feature,
                    threshold,
                    gain,
                });
            }
        }
    }
    best
}

pub(crate) struct TreeParams {
    pub max_depth: usize,
    pub min_samples_leaf: usize,
}

/// Grows one tree on `residuals`; `leaf_value` maps a leaf's rows to its output.
pub(crate) fn grow_tree<F>(
    x: &SparseRealMatrix,
    columns: &FeatureColumns,
    residuals: &[f64],
    params: &TreeParams,
    leaf_value: F,
) -> RegressionTree
where
    F: Fn(&[usize]) -> f64,
{
    let mut nodes = Vec::new();
    let rows: Vec<usize> = (0..x.n_rows()).collect();
    grow(x, columns, residuals, params, &leaf_value, rows, 0, &mut nodes);
    RegressionTree { nodes }
}

#[allow(clippy::too_many_arguments)]
fn grow<F>(
    x: &SparseRealMatrix,
    columns: &FeatureColumns,
    residuals: &[f64],
    params: &TreeParams,
    leaf_value: &F,
    rows: Vec<usize>,
    depth: usize,
    nodes: &mut Vec<Node>,
) -> usize
where
    F: Fn(&[usize]) -> f64,
{
    let at = nodes.len();
    let split = if depth < params.max_depth {
        split_search(columns, residuals, &rows, params.min_samples_leaf)
    } else {
        None
    };
    let Some(split) = split else {
        nodes.push(Node::Leaf {
            value: leaf_value(&rows),
        });
        return at;
    };
    nodes.push(Node::Leaf { value: 0.0 });
    let (left_rows, right_rows): (Vec<usize>, Vec<usize>) =
        rows.into_iter().partition(|&r| x.row(r).get(split.feature) <= split.threshold);
    let left = grow(x, columns, residuals, params, leaf_value, left_rows, depth + 1, nodes);
    let right = grow(x, columns, residuals, params, leaf_value, right_rows, depth + 1, nodes);
    nodes[at] = Node::Split {
        feature: split.feature,
        threshold: split.threshold,
        left,
        right,
    };
    at
}
