//! Stratified k-fold cross-validation and randomized search over a
//! parameter grid, refitting the whole pipeline inside every fold.

use std::collections::BTreeMap;
use std::fmt;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::ingest::ClassLabel;
use crate::pipeline::{FittedPipeline, PipelineParams};
use crate::rng;
use crate::tfidf::IdfMode;

pub const DEFAULT_N_SPLITS: usize = 5;

pub const TUNABLE_PARAMS: [&str; 6] = [
    "gbdt.learning_rate",
    "gbdt.max_depth",
    "gbdt.min_samples_leaf",
    "gbdt.n_iterations",
    "select.k",
    "tfidf.smoothing_mode",
];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum ParamValue {
    Int(i64),
    Real(f64),
    Text(String),
}

impl fmt::Display for ParamValue {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ParamValue::Int(v) => write!(f, "{v}"),
            ParamValue::Real(v) => write!(f, "{v}"),
            ParamValue::Text(v) => f.write_str(v),
        }
    }
}

/// One point of the grid: parameter name to value.
pub type Assignment = BTreeMap<String, ParamValue>;

fn positive_int(name: &str, v: &ParamValue) -> Result<usize> {
    match v {
        ParamValue::Int(i) if *i >= 1 => Ok(*i as usize),
        other => Err(Error::Config(format!("{name} must be an integer >= 1, got {other}"))),
    }
}

fn learning_rate(v: &ParamValue) -> Result<f64> {
    let x = match v {
        ParamValue::Int(i) => *i as f64,
        ParamValue::Real(x) => *x,
        ParamValue::Text(_) => f64::NAN,
    };
    if x > 0.0 && x <= 1.0 {
        Ok(x)
    } else {
        Err(Error::Config(format!("gbdt.learning_rate must lie in (0, 1], got {v}")))
    }
}

/// Writes one assignment onto a copy of `base`.
pub fn apply_assignment(base: &PipelineParams, assignment: &Assignment) -> Result<PipelineParams> {
    let mut p = *base;
    for (name, value) in assignment {
        match name.as_str() {
            "select.k" => p.k = positive_int(name, value)?,
            "gbdt.n_iterations" => p.gbdt.n_iterations = positive_int(name, value)?,
            "gbdt.max_depth" => p.gbdt.max_depth = positive_int(name, value)?,
            "gbdt.min_samples_leaf" => p.gbdt.min_samples_leaf = positive_int(name, value)?,
            "gbdt.learning_rate" => p.gbdt.learning_rate = learning_rate(value)?,
            "tfidf.smoothing_mode" => match value {
                ParamValue::Text(s) => p.idf_mode = IdfMode::parse(s)?,
                other => return Err(Error::Config(format!("tfidf.smoothing_mode must be a string, got {other}"))),
            },
            other => {
                return Err(Error::Config(format!(
                    "unknown grid parameter `{other}` (tunable: {})",
                    TUNABLE_PARAMS.join(", ")
                )))
            }
        }
    }
    Ok(p)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct ParamGrid {
    params: BTreeMap<String, Vec<ParamValue>>,
}

impl ParamGrid {
    /// Validates every listed value against its parameter's own rules.
    pub fn new(params: BTreeMap<String, Vec<ParamValue>>) -> Result<Self> {
        for (name, values) in &params {
            if values.is_empty() {
                return Err(Error::Config(format!("grid parameter `{name}` has no values")));
            }
            for v in values {
                let single: Assignment = [(name.clone(), v.clone())].into_iter().collect();
                apply_assignment(&PipelineParams::default(), &single)?;
            }
        }
        Ok(ParamGrid { params })
    }

    /// Parses a TOML grid. Both `"select.k" = [...]` and `[select]\nk = [...]`
    /// spellings are accepted; a scalar is a one-element list.
    pub fn from_toml(text: &str) -> Result<Self> {
        let table: toml::Table = text.parse().map_err(|e| Error::Config(format!("grid file: {e}")))?;
        let mut params = BTreeMap::new();
        flatten_grid("", &table, &mut params)?;
        ParamGrid::new(params)
    }

    pub fn params(&self) -> &BTreeMap<String, Vec<ParamValue>> {
        &self.params
    }

    /// Number of points in the cartesian product (1 for an empty grid).
    pub fn size(&self) -> usize {
        self.params.values().map(Vec::len).product()
    }

    /// Point `index` of the product in mixed-radix order, last parameter fastest.
    pub fn point(&self, index: usize) -> Assignment {
        let mut rest = index;
        let mut out = Assignment::new();
        for (name, values) in self.params.iter().rev() {
            out.insert(name.clone(), values[rest % values.len()].clone());
            rest /= values.len();
        }
        out
    }
}

fn flatten_grid(prefix: &str, table: &toml::Table, out: &mut BTreeMap<String, Vec<ParamValue>>) -> Result<()> {
    for (key, value) in table {
        let name = if prefix.is_empty() {
            key.clone()
        } else {
            format!("{prefix}.{key}")
        };
        match value {
            toml::Value::Table(t) => flatten_grid(&name, t, out)?,
            toml::Value::Array(items) => {
                let values = items.iter().map(|v| toml_param(&name, v)).collect::<Result<_>>()?;
                out.insert(name, values);
            }
            scalar => {
                out.insert(name.clone(), vec![toml_param(&name, scalar)?]);
            }
        }
    }
    Ok(())
}

fn toml_param(name: &str, v: &toml::Value) -> Result<ParamValue> {
    match v {
        toml::Value::Integer(i) => Ok(ParamValue::Int(*i)),
        toml::Value::Float(f) => Ok(ParamValue::Real(*f)),
        toml::Value::String(s) => Ok(ParamValue::Text(s.clone())),
        other => Err(Error::Config(format!("grid parameter `{name}`: unsupported value {other}"))),
    }
}

/// Draws `n_candidates` distinct grid points in sampled order.
pub fn sample_candidates(grid: &ParamGrid, n_candidates: usize, seed: u64) -> Result<Vec<Assignment>> {
    if n_candidates < 1 {
        return Err(Error::InvalidArgument("n_candidates must be at least 1".into()));
    }
    let size = grid.size();
    if n_candidates > size {
        return Err(Error::InvalidArgument(format!(
            "n_candidates = {n_candidates} exceeds the grid size {size}"
        )));
    }
    let mut rng = rng::seeded(seed);
    Ok(rng::sample_without_replacement(size, n_candidates, &mut rng)
        .into_iter()
        .map(|i| grid.point(i))
        .collect())
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FoldPlan {
    pub n_splits: usize,
    /// Fold index of every document.
    pub assignments: Vec<usize>,
    pub seed: u64,
}

impl FoldPlan {
    pub fn validation_rows(&self, fold: usize) -> Vec<usize> {
        (0..self.assignments.len()).filter(|&i| self.assignments[i] == fold).collect()
    }

    pub fn training_rows(&self, fold: usize) -> Vec<usize> {
        (0..self.assignments.len()).filter(|&i| self.assignments[i] != fold).collect()
    }

    /// `counts[class][fold]`
    pub fn class_fold_counts(&self, y: &[usize], n_classes: usize) -> Vec<Vec<usize>> {
        let mut counts = vec![vec![0; self.n_splits]; n_classes];
        for (&c, &f) in y.iter().zip(&self.assignments) {
            counts[c][f] += 1;
        }
        counts
    }
}

/// Stratified fold assignment.
///
/// Each class's positions (classes in index order) are shuffled with one
/// seeded stream and dealt round-robin onto the folds. The dealing position
/// carries over from one class to the next, which keeps fold sizes within one
/// of each other as well as per-class counts.
pub fn stratified_kfold(y: &[usize], labels: &[ClassLabel], n_splits: usize, seed: u64) -> Result<FoldPlan> {
    if n_splits < 2 {
        return Err(Error::InvalidArgument(format!("n_splits must be >= 2, got {n_splits}")));
    }
    let mut by_class: Vec<Vec<usize>> = vec![Vec::new(); labels.len()];
    for (i, &c) in y.iter().enumerate() {
        if c >= labels.len() {
            return Err(Error::InvalidArgument(format!("class index {c} >= {}", labels.len())));
        }
        by_class[c].push(i);
    }
    for (c, members) in by_class.iter().enumerate() {
        if !members.is_empty() && members.len() < n_splits {
            return Err(Error::ClassTooSmall {
                class: labels[c].to_string(),
                count: members.len(),
                required: n_splits,
            });
        }
    }
    let mut rng = rng::seeded(seed);
    let mut assignments = vec![0; y.len()];
    let mut next = 0;
    for members in &mut by_class {
        rng::fisher_yates(members, &mut rng);
        for &i in members.iter() {
            assignments[i] = next;
            next = (next + 1) % n_splits;
        }
    }
    Ok(FoldPlan {
        n_splits,
        assignments,
        seed,
    })
}

/// Preprocessed training data: token lists with class indices.
#[derive(Debug, Clone, PartialEq)]
pub struct TrainingData {
    pub docs: Vec<Vec<String>>,
    pub y: Vec<usize>,
    pub labels: Vec<ClassLabel>,
}

impl TrainingData {
    fn rows(&self, idx: &[usize]) -> (Vec<&[String]>, Vec<usize>) {
        (idx.iter().map(|&i| self.docs[i].as_slice()).collect(), idx.iter().map(|&i| self.y[i]).collect())
    }
}

/// Per-fold accuracy of `params`, fitting every stage on the training folds only.
pub fn cross_validate(data: &TrainingData, params: &PipelineParams, folds: &FoldPlan) -> Result<Vec<f64>> {
    cross_validate_inspect(data, params, folds, |_, _, _| {})
}

/// [`cross_validate`] with a hook that sees each fold's fitted pipeline and
/// its training rows.
pub fn cross_validate_inspect<F>(
    data: &TrainingData,
    params: &PipelineParams,
    folds: &FoldPlan,
    inspect: F,
) -> Result<Vec<f64>>
where
    F: Fn(usize, &FittedPipeline, &[usize]) + Sync,
{
    if folds.assignments.len() != data.docs.len() {
        return Err(Error::DimensionMismatch {
            context: "fold plan".into(),
            expected: data.docs.len(),
            found: folds.assignments.len(),
        });
    }
    (0..folds.n_splits)
        .into_par_iter()
        .map(|fold| {
            fold_accuracy(data, params, folds, fold, &inspect)
                .map_err(|e| e.in_stage(format!("cross-validation fold {fold}")))
        })
        .collect()
}

fn fold_accuracy<F>(data: &TrainingData, params: &PipelineParams, folds: &FoldPlan, fold: usize, inspect: &F) -> Result<f64>
where
    F: Fn(usize, &FittedPipeline, &[usize]),
{
    let train = folds.training_rows(fold);
    let valid = folds.validation_rows(fold);
    let (train_docs, train_y) = data.rows(&train);
    let pipeline = FittedPipeline::fit(&train_docs, &train_y, &data.labels, params)?;
    inspect(fold, &pipeline, &train);
    let (valid_docs, valid_y) = data.rows(&valid);
    if valid_docs.is_empty() {
        return Err(Error::Empty(format!("fold {fold} has no validation rows")));
    }
    let preds = pipeline.predict_tokens(&valid_docs)?;
    let correct = preds.iter().zip(&valid_y).filter(|(p, &y)| p.class_index == y).count();
    Ok(correct as f64 / valid_y.len() as f64)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Trial {
    pub params: Assignment,
    pub fold_accuracies: Vec<f64>,
    pub mean: f64,
    pub std: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TuneResult {
    pub best_params: Assignment,
    pub best_score: f64,
    pub trials: Vec<Trial>,
}

impl TuneResult {
    /// Best trial by mean accuracy; the earliest sampled wins ties.
    pub fn from_trials(trials: Vec<Trial>) -> Result<Self> {
        let mut best = trials.first().ok_or_else(|| Error::Empty("no trials".into()))?;
        for t in &trials {
            if t.mean > best.mean {
                best = t;
            }
        }
        Ok(TuneResult {
            best_params: best.params.clone(),
            best_score: best.mean,
            trials: trials.clone(),
        })
    }
}

fn mean_std(xs: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / n;
    (mean, var.sqrt())
}

/// Scores the given candidates in order (parallel internally, reduced in order).
pub fn evaluate_candidates(
    data: &TrainingData,
    base: &PipelineParams,
    candidates: &[Assignment],
    folds: &FoldPlan,
) -> Result<Vec<Trial>> {
    candidates
        .par_iter()
        .map(|candidate| {
            let params = apply_assignment(base, candidate)?;
            let fold_accuracies = cross_validate(data, &params, folds)?;
            let (mean, std) = mean_std(&fold_accuracies);
            Ok(Trial {
                params: candidate.clone(),
                fold_accuracies,
                mean,
                std,
            })
        })
        .collect()
}

pub fn randomized_search(
    data: &TrainingData,
    grid: &ParamGrid,
    base: &PipelineParams,
    n_candidates: usize,
    folds: &FoldPlan,
    seed: u64,
) -> Result<TuneResult> {
    let candidates = sample_candidates(grid, n_candidates, seed)?;
    TuneResult::from_trials(evaluate_candidates(data, base, &candidates, folds)?)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn labels(k: usize) -> Vec<ClassLabel> {
        (0..k).map(|i| ClassLabel::new(format!("c{i}"))).collect()
    }

    fn labels_with_sizes(sizes: &[usize]) -> Vec<usize> {
        sizes.iter().enumerate().flat_map(|(c, &n)| std::iter::repeat_n(c, n)).collect()
    }

    #[test]
    fn exact_stratification() {
        let y = labels_with_sizes(&[3, 3, 3]);
        let plan = stratified_kfold(&y, &labels(3), 3, 1).unwrap();
        assert_eq!(plan.class_fold_counts(&y, 3), vec![vec![1; 3]; 3]);
    }

    #[test]
    fn small_class_is_rejected_by_name() {
        let y = labels_with_sizes(&[5, 2]);
        let err = stratified_kfold(&y, &labels(2), 3, 1).unwrap_err();
        assert!(matches!(err, Error::ClassTooSmall { ref class, count: 2, required: 3 } if class == "c1"));
    }

    #[test]
    fn uneven_class_counts() {
        let y = labels_with_sizes(&[10, 7, 5]);
        let plan = stratified_kfold(&y, &labels(3), 3, 42).unwrap();
        let counts = plan.class_fold_counts(&y, 3);
        let mut sorted: Vec<Vec<usize>> = counts
            .iter()
            .map(|c| {
                let mut c = c.clone();
                c.sort_unstable_by(|a, b| b.cmp(a));
                c
            })
            .collect();
        assert_eq!(sorted, vec![vec![4, 3, 3], vec![3, 2, 2], vec![2, 2, 1]]);
        sorted.clear();
        let sizes: Vec<usize> = (0..3).map(|f| plan.validation_rows(f).len()).collect();
        assert!(sizes.iter().max().unwrap() - sizes.iter().min().unwrap() <= 1);
    }

    #[test]
    fn fold_plan_is_seed_deterministic() {
        let y = labels_with_sizes(&[8, 9, 10]);
        let a = stratified_kfold(&y, &labels(3), 4, 3).unwrap();
        assert_eq!(a, stratified_kfold(&y, &labels(3), 4, 3).unwrap());
        assert_ne!(a, stratified_kfold(&y, &labels(3), 4, 4).unwrap());
    }

    fn grid(text: &str) -> ParamGrid {
        ParamGrid::from_toml(text).unwrap()
    }

    #[test]
    fn grid_parsing_accepts_both_spellings() {
        let a = grid("\"select.k\" = [10, 20]\n\"gbdt.learning_rate\" = [0.1, 0.3]\n");
        let b = grid("[select]\nk = [10, 20]\n[gbdt]\nlearning_rate = [0.1, 0.3]\n");
        assert_eq!(a, b);
        assert_eq!(a.size(), 4);
        let c = grid("[tfidf]\nsmoothing_mode = \"smoothed\"\n");
        assert_eq!(c.size(), 1);
    }

    #[test]
    fn grid_rejects_bad_values() {
        for bad in [
            "\"select.k\" = [0]",
            "\"gbdt.learning_rate\" = [1.5]",
            "\"gbdt.max_depth\" = [2.5]",
            "\"tfidf.smoothing_mode\" = [\"log2\"]",
            "\"gbdt.subsample\" = [0.5]",
            "\"select.k\" = []",
        ] {
            assert!(ParamGrid::from_toml(bad).is_err(), "{bad}");
        }
    }

    #[test]
    fn sampling() {
        let g = grid("\"select.k\" = [10]");
        let s = sample_candidates(&g, 1, 9).unwrap();
        assert_eq!(s, vec![g.point(0)]);

        let g = grid("\"select.k\" = [10, 20, 30]\n\"gbdt.max_depth\" = [1, 2]\n");
        let all = sample_candidates(&g, 6, 5).unwrap();
        let mut seen: Vec<Assignment> = all.clone();
        seen.sort_by_key(|a| format!("{a:?}"));
        let mut product: Vec<Assignment> = (0..6).map(|i| g.point(i)).collect();
        product.sort_by_key(|a| format!("{a:?}"));
        assert_eq!(seen, product);
        assert_eq!(sample_candidates(&g, 6, 5).unwrap(), all);
        assert!(sample_candidates(&g, 7, 5).is_err());
        assert!(sample_candidates(&g, 0, 5).is_err());
    }

    #[test]
    fn assignment_applies_onto_base() {
        let a: Assignment = [
            ("select.k".to_string(), ParamValue::Int(50)),
            ("gbdt.learning_rate".to_string(), ParamValue::Real(0.3)),
            ("tfidf.smoothing_mode".to_string(), ParamValue::Text("smoothed".into())),
        ]
        .into_iter()
        .collect();
        let p = apply_assignment(&PipelineParams::default(), &a).unwrap();
        assert_eq!(p.k, 50);
        assert_eq!(p.gbdt.learning_rate, 0.3);
        assert_eq!(p.idf_mode, IdfMode::Smoothed);
        assert_eq!(p.gbdt.n_iterations, PipelineParams::default().gbdt.n_iterations);
    }

    #[test]
    fn best_trial_tie_goes_to_earliest() {
        let t = |k: i64, accs: Vec<f64>| {
            let (mean, std) = mean_std(&accs);
            Trial {
                params: [("select.k".to_string(), ParamValue::Int(k))].into_iter().collect(),
                fold_accuracies: accs,
                mean,
                std,
            }
        };
        let r = TuneResult::from_trials(vec![t(1, vec![0.5, 0.7]), t(2, vec![0.7, 0.5]), t(3, vec![0.4, 0.4])]).unwrap();
        assert_eq!(r.best_params["select.k"], ParamValue::Int(1));
        assert_eq!(r.best_score, 0.6);
        let r = TuneResult::from_trials(vec![t(1, vec![0.5, 0.5]), t(2, vec![0.6, 0.9])]).unwrap();
        assert_eq!(r.best_params["select.k"], ParamValue::Int(2));
    }

    mod props {
        use super::*;
        use proptest::prelude::*;

        proptest! {
            #[test]
            fn fold_counts_differ_by_at_most_one(
                sizes in proptest::collection::vec(10usize..60, 3..6),
                n_splits in prop_oneof![Just(3usize), Just(5), Just(10)],
                seed in any::<u64>(),
            ) {
                let y = labels_with_sizes(&sizes);
                let plan = stratified_kfold(&y, &labels(sizes.len()), n_splits, seed).unwrap();
                prop_assert_eq!(plan.assignments.len(), y.len());
                for per_fold in plan.class_fold_counts(&y, sizes.len()) {
                    let (lo, hi) = (per_fold.iter().min().unwrap(), per_fold.iter().max().unwrap());
                    prop_assert!(hi - lo <= 1);
                }
            }
        }
    }
}
