//! Evaluation protocol: stratified five-fold cross-validation with an
//! inner grid search per fold, pooled confusion-matrix metrics, and the
//! two multi-view strategies (feature concatenation and OR decision
//! fusion).
//!
//! Fold metrics are pooled by summing confusion matrices across folds and
//! computing the metrics once on the total; per-fold reports are kept for
//! inspection. Undefined metrics stay undefined instead of collapsing to
//! zero.

use std::fmt;
use std::str::FromStr;

use rand::seq::SliceRandom;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::dataio::{fuse_view_labels, BinaryLabel, View};
use crate::ml::{
    self, ClassWeight, CnnDims, CnnParams, Criterion, DistanceMetric, DtParams, KnnAlgorithm,
    KnnParams, KnnWeights, MaxFeatures, MlError, ModelKind, ModelParams, ModelSpec, RfParams,
    Splitter, SvmKernel, SvmParams, TrainedModel,
};

#[derive(Debug, Error)]
pub enum EvalError {
    #[error("class {label} has {count} members, need at least {k} for {k}-fold stratification")]
    ClassTooSmall {
        label: BinaryLabel,
        count: usize,
        k: usize,
    },
    #[error("hyperparameter grid is empty")]
    EmptyGrid,
    #[error("all {attempted} grid cells failed to produce a score")]
    AllCellsFailed { attempted: usize },
    #[error("mode {0} has no usable subjects")]
    NoSubjects(EvalMode),
    #[error(transparent)]
    Ml(#[from] MlError),
}

/// Cross-validation fold plan over sample indices.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct FoldPlan {
    pub k: usize,
    pub folds: Vec<Fold>,
    pub seed: u64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Fold {
    pub train: Vec<usize>,
    pub test: Vec<usize>,
}

/// Stratified k-fold split: each class is shuffled once with a seeded
/// generator and dealt round-robin to the test folds, so per-fold class
/// counts never deviate from proportionality by more than one sample.
pub fn stratified_kfold(
    labels: &[BinaryLabel],
    k: usize,
    seed: u64,
) -> Result<FoldPlan, EvalError> {
    assert!(k >= 2, "need at least two folds");
    let mut tests: Vec<Vec<usize>> = vec![Vec::new(); k];
    for (class_id, class) in [BinaryLabel::NonMi, BinaryLabel::Mi].into_iter().enumerate() {
        let mut members: Vec<usize> = labels
            .iter()
            .enumerate()
            .filter(|(_, &l)| l == class)
            .map(|(i, _)| i)
            .collect();
        if members.len() < k {
            return Err(EvalError::ClassTooSmall {
                label: class,
                count: members.len(),
                k,
            });
        }
        let mut rng = crate::rng::stream(seed, "stratify", class_id as u64);
        members.shuffle(&mut rng);
        for (i, idx) in members.into_iter().enumerate() {
            tests[i % k].push(idx);
        }
    }
    let folds = tests
        .into_iter()
        .map(|mut test| {
            test.sort_unstable();
            let train = (0..labels.len()).filter(|i| !test.contains(i)).collect();
            Fold { train, test }
        })
        .collect();
    Ok(FoldPlan { k, folds, seed })
}

/// Binary confusion counts; infarction is the positive class.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConfusionMatrix {
    pub tp: u64,
    pub tn: u64,
    pub fp: u64,
    pub fn_: u64,
}

impl ConfusionMatrix {
    pub fn record(&mut self, truth: BinaryLabel, predicted: BinaryLabel) {
        match (truth.is_mi(), predicted.is_mi()) {
            (true, true) => self.tp += 1,
            (true, false) => self.fn_ += 1,
            (false, true) => self.fp += 1,
            (false, false) => self.tn += 1,
        }
    }

    pub fn add(&mut self, other: &ConfusionMatrix) {
        self.tp += other.tp;
        self.tn += other.tn;
        self.fp += other.fp;
        self.fn_ += other.fn_;
    }

    pub fn total(&self) -> u64 {
        self.tp + self.tn + self.fp + self.fn_
    }
}

/// The six standard metrics as percentages; `None` marks an undefined
/// value (zero denominator), which is never coerced to zero.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    pub sensitivity: Option<f64>,
    pub specificity: Option<f64>,
    pub precision: Option<f64>,
    pub f1: Option<f64>,
    pub f2: Option<f64>,
    pub accuracy: Option<f64>,
}

impl MetricsReport {
    /// Report values rounded to two decimals, full precision preserved in
    /// the source struct.
    pub fn rounded(&self) -> MetricsReport {
        let r = |v: Option<f64>| v.map(|x| (x * 100.0).round() / 100.0);
        MetricsReport {
            sensitivity: r(self.sensitivity),
            specificity: r(self.specificity),
            precision: r(self.precision),
            f1: r(self.f1),
            f2: r(self.f2),
            accuracy: r(self.accuracy),
        }
    }
}

fn f_beta(precision: Option<f64>, sensitivity: Option<f64>, beta: f64) -> Option<f64> {
    let (p, s) = (precision?, sensitivity?);
    let den = beta * beta * p + s;
    if den <= 0.0 {
        return None;
    }
    Some((1.0 + beta * beta) * p * s / den)
}

/// Derives the six metrics from a confusion matrix.
pub fn compute_metrics(cm: &ConfusionMatrix) -> MetricsReport {
    let pct = |num: u64, den: u64| {
        if den > 0 {
            Some(100.0 * num as f64 / den as f64)
        } else {
            None
        }
    };
    let sensitivity = pct(cm.tp, cm.tp + cm.fn_);
    let specificity = pct(cm.tn, cm.tn + cm.fp);
    let precision = pct(cm.tp, cm.tp + cm.fp);
    let accuracy = pct(cm.tp + cm.tn, cm.total());
    MetricsReport {
        sensitivity,
        specificity,
        precision,
        f1: f_beta(precision, sensitivity, 1.0),
        f2: f_beta(precision, sensitivity, 2.0),
        accuracy,
    }
}

/// OR decision fusion: infarcted when either view's prediction is.
pub fn or_fuse(a4c: BinaryLabel, a2c: BinaryLabel) -> BinaryLabel {
    fuse_view_labels(a4c, a2c)
}

/// Metric used to rank grid cells.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SelectionMetric {
    Sensitivity,
    Specificity,
    Precision,
    F1,
    F2,
    Accuracy,
}

impl SelectionMetric {
    fn extract(&self, m: &MetricsReport) -> Option<f64> {
        match self {
            SelectionMetric::Sensitivity => m.sensitivity,
            SelectionMetric::Specificity => m.specificity,
            SelectionMetric::Precision => m.precision,
            SelectionMetric::F1 => m.f1,
            SelectionMetric::F2 => m.f2,
            SelectionMetric::Accuracy => m.accuracy,
        }
    }
}

/// Hyperparameter value lists, one per model family; the defaults span the
/// full search domains.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default)]
pub struct GridConfig {
    pub dt_criterion: Vec<Criterion>,
    pub dt_max_features: Vec<MaxFeatures>,
    pub dt_splitter: Vec<Splitter>,
    pub rf_bootstrap: Vec<bool>,
    pub rf_class_weight: Vec<ClassWeight>,
    pub rf_criterion: Vec<Criterion>,
    pub rf_max_features: Vec<MaxFeatures>,
    pub rf_warm_start: Vec<bool>,
    pub rf_n_trees: Vec<usize>,
    pub svm_kernel: Vec<SvmKernel>,
    pub svm_c: Vec<f64>,
    pub svm_gamma: Vec<f64>,
    pub knn_algorithm: Vec<KnnAlgorithm>,
    pub knn_weights: Vec<KnnWeights>,
    pub knn_k: Vec<usize>,
    pub knn_metric: Vec<DistanceMetric>,
    pub cnn_learning_rate: Vec<f64>,
    pub cnn_filters: Vec<usize>,
    pub cnn_kernel: Vec<usize>,
    pub cnn_epochs: Vec<usize>,
    pub cnn_fc_width: usize,
}

impl Default for GridConfig {
    fn default() -> Self {
        Self {
            dt_criterion: vec![Criterion::Gini, Criterion::Entropy],
            dt_max_features: vec![MaxFeatures::Auto, MaxFeatures::Log2, MaxFeatures::Sqrt],
            dt_splitter: vec![Splitter::Random, Splitter::Best],
            rf_bootstrap: vec![false, true],
            rf_class_weight: vec![ClassWeight::Balanced, ClassWeight::BalancedSubsample],
            rf_criterion: vec![Criterion::Gini, Criterion::Entropy],
            rf_max_features: vec![MaxFeatures::Auto, MaxFeatures::Log2, MaxFeatures::Sqrt],
            rf_warm_start: vec![false, true],
            rf_n_trees: (1..=10).map(|i| 5 * i).collect(),
            svm_kernel: vec![SvmKernel::Rbf, SvmKernel::Linear],
            svm_c: vec![1.0, 10.0, 100.0, 1000.0],
            svm_gamma: vec![1e-1, 1e-2, 1e-3, 1e-4, 1e-5, 1e-6],
            knn_algorithm: vec![
                KnnAlgorithm::Auto,
                KnnAlgorithm::Brute,
                KnnAlgorithm::BallTree,
                KnnAlgorithm::KdTree,
            ],
            knn_weights: vec![KnnWeights::Uniform, KnnWeights::Distance],
            knn_k: (1..=6).map(|i| 5 * i).collect(),
            knn_metric: vec![DistanceMetric::Manhattan, DistanceMetric::Euclidean],
            cnn_learning_rate: vec![1e-1, 1e-2, 1e-3, 1e-4, 1e-5, 1e-6, 1e-7],
            cnn_filters: vec![4, 8, 12, 16, 24, 32],
            cnn_kernel: vec![3, 5, 7, 9, 11, 13, 15],
            cnn_epochs: vec![25, 50, 75, 100],
            cnn_fc_width: 16,
        }
    }
}

/// An enumerated hyperparameter grid for one model family. Cell order is
/// the nested-loop order of the value lists and is the documented
/// tie-break: equal scores keep the earlier cell.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct GridSpec {
    pub kind: ModelKind,
    pub cells: Vec<ModelParams>,
    pub selection: SelectionMetric,
}

impl GridSpec {
    pub fn single(params: ModelParams) -> Self {
        Self {
            kind: params.kind(),
            cells: vec![params],
            selection: SelectionMetric::F1,
        }
    }

    /// Builds the grid for one family. `n_features` filters convolutional
    /// architectures that would collapse for the given input length.
    pub fn from_config(
        kind: ModelKind,
        config: &GridConfig,
        n_features: Option<usize>,
    ) -> Result<Self, EvalError> {
        let mut cells = Vec::new();
        match kind {
            ModelKind::Dt => {
                for &criterion in &config.dt_criterion {
                    for &max_features in &config.dt_max_features {
                        for &splitter in &config.dt_splitter {
                            cells.push(ModelParams::Dt(DtParams {
                                criterion,
                                max_features,
                                splitter,
                            }));
                        }
                    }
                }
            }
            ModelKind::Rf => {
                for &bootstrap in &config.rf_bootstrap {
                    for &class_weight in &config.rf_class_weight {
                        for &criterion in &config.rf_criterion {
                            for &max_features in &config.rf_max_features {
                                for &warm_start in &config.rf_warm_start {
                                    for &n_trees in &config.rf_n_trees {
                                        cells.push(ModelParams::Rf(RfParams {
                                            bootstrap,
                                            class_weight,
                                            criterion,
                                            max_features,
                                            warm_start,
                                            n_trees,
                                        }));
                                    }
                                }
                            }
                        }
                    }
                }
            }
            ModelKind::Svm => {
                for &kernel in &config.svm_kernel {
                    for &c in &config.svm_c {
                        for &gamma in &config.svm_gamma {
                            cells.push(ModelParams::Svm(SvmParams { kernel, c, gamma }));
                        }
                    }
                }
            }
            ModelKind::Knn => {
                for &algorithm in &config.knn_algorithm {
                    for &weights in &config.knn_weights {
                        for &k in &config.knn_k {
                            for &metric in &config.knn_metric {
                                cells.push(ModelParams::Knn(KnnParams {
                                    algorithm,
                                    weights,
                                    k,
                                    metric,
                                }));
                            }
                        }
                    }
                }
            }
            ModelKind::Cnn1d => {
                for &learning_rate in &config.cnn_learning_rate {
                    for &filters in &config.cnn_filters {
                        for &kernel_size in &config.cnn_kernel {
                            for &epochs in &config.cnn_epochs {
                                let params = CnnParams {
                                    learning_rate,
                                    filters,
                                    kernel_size,
                                    epochs,
                                    fc_width: config.cnn_fc_width,
                                };
                                if let Some(len) = n_features {
                                    if CnnDims::for_arch(len, &params).is_err() {
                                        continue;
                                    }
                                }
                                cells.push(ModelParams::Cnn(params));
                            }
                        }
                    }
                }
            }
        }
        if cells.is_empty() {
            return Err(EvalError::EmptyGrid);
        }
        Ok(Self {
            kind,
            cells,
            selection: SelectionMetric::F1,
        })
    }
}

/// Winning cell of a grid search plus the per-cell mean scores.
#[derive(Debug, Clone)]
pub struct GridSearchResult {
    pub best_index: usize,
    pub best: ModelParams,
    /// Mean inner-fold selection score per cell; `None` when the cell
    /// failed to train or never produced a defined score.
    pub scores: Vec<Option<f64>>,
}

/// Scores every grid cell by its mean inner-fold selection metric on the
/// supplied training set and returns the argmax. Cells share one inner
/// fold plan; ties keep the first-enumerated cell. Folds whose metric is
/// undefined are skipped in the mean.
pub fn grid_search(
    grid: &GridSpec,
    x: &[Vec<f64>],
    y: &[BinaryLabel],
    inner_k: usize,
    seed: u64,
) -> Result<GridSearchResult, EvalError> {
    if grid.cells.is_empty() {
        return Err(EvalError::EmptyGrid);
    }
    let plan = stratified_kfold(y, inner_k, crate::rng::derive(seed, "inner-folds", 0))?;

    let scores: Vec<Option<f64>> = grid
        .cells
        .par_iter()
        .map(|params| {
            let mut values = Vec::with_capacity(plan.k);
            for (f, fold) in plan.folds.iter().enumerate() {
                let xt: Vec<Vec<f64>> = fold.train.iter().map(|&i| x[i].clone()).collect();
                let yt: Vec<BinaryLabel> = fold.train.iter().map(|&i| y[i]).collect();
                let spec = ModelSpec::new(
                    params.clone(),
                    crate::rng::derive(seed, "inner-fit", f as u64),
                );
                let model = match ml::train(&spec, &xt, &yt) {
                    Ok(m) => m,
                    Err(_) => return None,
                };
                let mut cm = ConfusionMatrix::default();
                for &i in &fold.test {
                    match ml::predict(&model, &x[i]) {
                        Ok(p) => cm.record(y[i], p.label),
                        Err(_) => return None,
                    }
                }
                if let Some(v) = grid.selection.extract(&compute_metrics(&cm)) {
                    values.push(v);
                }
            }
            if values.is_empty() {
                None
            } else {
                Some(values.iter().sum::<f64>() / values.len() as f64)
            }
        })
        .collect();

    let mut best: Option<(usize, f64)> = None;
    for (i, score) in scores.iter().enumerate() {
        if let Some(s) = score {
            if best.map_or(true, |(_, bs)| *s > bs) {
                best = Some((i, *s));
            }
        }
    }
    let (best_index, _) = best.ok_or(EvalError::AllCellsFailed {
        attempted: grid.cells.len(),
    })?;
    Ok(GridSearchResult {
        best_index,
        best: grid.cells[best_index].clone(),
        scores,
    })
}

/// Evaluation mode: one view alone, concatenated features, or OR fusion of
/// two single-view detectors.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EvalMode {
    A4c,
    A2c,
    MultiviewConcat,
    MultiviewOr,
}

impl fmt::Display for EvalMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            EvalMode::A4c => "a4c",
            EvalMode::A2c => "a2c",
            EvalMode::MultiviewConcat => "multiview_concat",
            EvalMode::MultiviewOr => "multiview_or",
        };
        write!(f, "{s}")
    }
}

impl FromStr for EvalMode {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "a4c" => Ok(EvalMode::A4c),
            "a2c" => Ok(EvalMode::A2c),
            "multiview_concat" => Ok(EvalMode::MultiviewConcat),
            "multiview_or" => Ok(EvalMode::MultiviewOr),
            other => Err(format!(
                "unknown mode {other:?}, expected a4c|a2c|multiview_concat|multiview_or"
            )),
        }
    }
}

/// One subject's extracted features and labels.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SubjectRecord {
    pub subject_id: String,
    pub phi_a4c: Option<[f64; 6]>,
    pub phi_a2c: Option<[f64; 6]>,
    pub label_a4c: Option<BinaryLabel>,
    pub label_a2c: Option<BinaryLabel>,
    pub fused: BinaryLabel,
}

/// Feature cohort ready for evaluation.
#[derive(Debug, Clone, Default, Serialize, Deserialize)]
pub struct Cohort {
    pub subjects: Vec<SubjectRecord>,
}

struct ModeData {
    ids: Vec<String>,
    x: Vec<Vec<f64>>,
    y: Vec<BinaryLabel>,
}

impl Cohort {
    fn single_view(&self, view: View) -> ModeData {
        let mut data = ModeData {
            ids: Vec::new(),
            x: Vec::new(),
            y: Vec::new(),
        };
        for s in &self.subjects {
            let (phi, label) = match view {
                View::A4C => (s.phi_a4c, s.label_a4c),
                View::A2C => (s.phi_a2c, s.label_a2c),
            };
            if let (Some(phi), Some(label)) = (phi, label) {
                data.ids.push(s.subject_id.clone());
                data.x.push(phi.to_vec());
                data.y.push(label);
            }
        }
        data
    }

    fn concatenated(&self) -> ModeData {
        let mut data = ModeData {
            ids: Vec::new(),
            x: Vec::new(),
            y: Vec::new(),
        };
        for s in &self.subjects {
            if let (Some(a4c), Some(a2c)) = (s.phi_a4c, s.phi_a2c) {
                let mut f = Vec::with_capacity(12);
                f.extend_from_slice(&a4c);
                f.extend_from_slice(&a2c);
                data.ids.push(s.subject_id.clone());
                data.x.push(f);
                data.y.push(s.fused);
            }
        }
        data
    }

    /// Subjects usable for OR fusion: both views and both labels present.
    fn both_views(&self) -> Vec<&SubjectRecord> {
        self.subjects
            .iter()
            .filter(|s| {
                s.phi_a4c.is_some()
                    && s.phi_a2c.is_some()
                    && s.label_a4c.is_some()
                    && s.label_a2c.is_some()
            })
            .collect()
    }
}

/// Per-fold outcome: the selected hyperparameters and the fold's test
/// confusion matrix.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct FoldReport {
    pub fold: usize,
    /// Selected cell per trained model, keyed by scope ("model", or the
    /// view name in OR mode).
    pub selected: Vec<(String, ModelParams)>,
    pub cm: ConfusionMatrix,
    pub metrics: MetricsReport,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SubjectPrediction {
    pub subject_id: String,
    pub truth: BinaryLabel,
    pub predicted: BinaryLabel,
    pub score: f64,
}

/// Pooled per-view detector performance inside OR fusion, against the
/// fused ground truth.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct OrBreakdown {
    pub cm_a4c: ConfusionMatrix,
    pub cm_a2c: ConfusionMatrix,
    pub metrics_a4c: MetricsReport,
    pub metrics_a2c: MetricsReport,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ExperimentReport {
    pub mode: EvalMode,
    pub kind: ModelKind,
    pub seed: u64,
    pub n_subjects: usize,
    pub folds: Vec<FoldReport>,
    pub pooled: ConfusionMatrix,
    pub pooled_metrics: MetricsReport,
    pub predictions: Vec<SubjectPrediction>,
    pub or_breakdown: Option<OrBreakdown>,
}

/// Runs the full protocol for one mode and one model family: outer
/// stratified five-fold split, grid search within each fold's training
/// split, a final fit on that split, and evaluation on the untouched test
/// split. Confusion matrices are pooled across folds.
pub fn run_experiment(
    cohort: &Cohort,
    mode: EvalMode,
    grid: &GridSpec,
    seed: u64,
) -> Result<ExperimentReport, EvalError> {
    match mode {
        EvalMode::A4c => single_path(cohort.single_view(View::A4C), mode, grid, seed),
        EvalMode::A2c => single_path(cohort.single_view(View::A2C), mode, grid, seed),
        EvalMode::MultiviewConcat => single_path(cohort.concatenated(), mode, grid, seed),
        EvalMode::MultiviewOr => or_path(cohort, grid, seed),
    }
}

fn single_path(
    data: ModeData,
    mode: EvalMode,
    grid: &GridSpec,
    seed: u64,
) -> Result<ExperimentReport, EvalError> {
    if data.ids.is_empty() {
        return Err(EvalError::NoSubjects(mode));
    }
    let outer = stratified_kfold(&data.y, 5, crate::rng::derive(seed, "outer-folds", 0))?;

    let fold_outputs: Vec<Result<(FoldReport, Vec<SubjectPrediction>), EvalError>> = outer
        .folds
        .par_iter()
        .enumerate()
        .map(|(f, fold)| {
            let xt: Vec<Vec<f64>> = fold.train.iter().map(|&i| data.x[i].clone()).collect();
            let yt: Vec<BinaryLabel> = fold.train.iter().map(|&i| data.y[i]).collect();
            let gs = grid_search(grid, &xt, &yt, 5, crate::rng::derive(seed, "grid", f as u64))?;
            let spec = ModelSpec::new(gs.best.clone(), crate::rng::derive(seed, "fit", f as u64));
            let model = ml::train(&spec, &xt, &yt)?;
            let mut cm = ConfusionMatrix::default();
            let mut predictions = Vec::with_capacity(fold.test.len());
            for &i in &fold.test {
                let p = ml::predict(&model, &data.x[i])?;
                cm.record(data.y[i], p.label);
                predictions.push(SubjectPrediction {
                    subject_id: data.ids[i].clone(),
                    truth: data.y[i],
                    predicted: p.label,
                    score: p.score,
                });
            }
            Ok((
                FoldReport {
                    fold: f,
                    selected: vec![("model".to_string(), gs.best)],
                    metrics: compute_metrics(&cm),
                    cm,
                },
                predictions,
            ))
        })
        .collect();

    let mut folds = Vec::new();
    let mut predictions = Vec::new();
    let mut pooled = ConfusionMatrix::default();
    for out in fold_outputs {
        let (report, preds) = out?;
        pooled.add(&report.cm);
        folds.push(report);
        predictions.extend(preds);
    }
    Ok(ExperimentReport {
        mode,
        kind: grid.kind,
        seed,
        n_subjects: data.ids.len(),
        pooled_metrics: compute_metrics(&pooled),
        pooled,
        folds,
        predictions,
        or_breakdown: None,
    })
}

struct ViewFit {
    selected: ModelParams,
    model: TrainedModel,
}

fn fit_view(
    subjects: &[&SubjectRecord],
    train: &[usize],
    view: View,
    grid: &GridSpec,
    seed: u64,
    fold: usize,
) -> Result<ViewFit, EvalError> {
    let pick = |s: &SubjectRecord| match view {
        View::A4C => (s.phi_a4c.unwrap(), s.label_a4c.unwrap()),
        View::A2C => (s.phi_a2c.unwrap(), s.label_a2c.unwrap()),
    };
    let xt: Vec<Vec<f64>> = train
        .iter()
        .map(|&i| pick(subjects[i]).0.to_vec())
        .collect();
    let yt: Vec<BinaryLabel> = train.iter().map(|&i| pick(subjects[i]).1).collect();
    let (grid_label, fit_label) = match view {
        View::A4C => ("grid-a4c", "fit-a4c"),
        View::A2C => ("grid-a2c", "fit-a2c"),
    };
    let gs = grid_search(
        grid,
        &xt,
        &yt,
        5,
        crate::rng::derive(seed, grid_label, fold as u64),
    )?;
    let spec = ModelSpec::new(
        gs.best.clone(),
        crate::rng::derive(seed, fit_label, fold as u64),
    );
    let model = ml::train(&spec, &xt, &yt)?;
    Ok(ViewFit {
        selected: gs.best,
        model,
    })
}

/// OR fusion: two single-view detectors are trained per fold on their own
/// view's features and labels; test predictions are fused with OR and
/// scored against the fused ground truth. The fused score is the larger
/// of the two view scores, monotone with the fused decision.
fn or_path(cohort: &Cohort, grid: &GridSpec, seed: u64) -> Result<ExperimentReport, EvalError> {
    let subjects = cohort.both_views();
    if subjects.is_empty() {
        return Err(EvalError::NoSubjects(EvalMode::MultiviewOr));
    }
    let fused: Vec<BinaryLabel> = subjects.iter().map(|s| s.fused).collect();
    let outer = stratified_kfold(&fused, 5, crate::rng::derive(seed, "outer-folds", 0))?;

    type OrFold = (
        FoldReport,
        Vec<SubjectPrediction>,
        ConfusionMatrix,
        ConfusionMatrix,
    );
    let fold_outputs: Vec<Result<OrFold, EvalError>> = outer
        .folds
        .par_iter()
        .enumerate()
        .map(|(f, fold)| {
            let a4c = fit_view(&subjects, &fold.train, View::A4C, grid, seed, f)?;
            let a2c = fit_view(&subjects, &fold.train, View::A2C, grid, seed, f)?;
            let mut cm = ConfusionMatrix::default();
            let mut cm_a4c = ConfusionMatrix::default();
            let mut cm_a2c = ConfusionMatrix::default();
            let mut predictions = Vec::with_capacity(fold.test.len());
            for &i in &fold.test {
                let s = subjects[i];
                let p4 = ml::predict(&a4c.model, &s.phi_a4c.unwrap())?;
                let p2 = ml::predict(&a2c.model, &s.phi_a2c.unwrap())?;
                let label = or_fuse(p4.label, p2.label);
                cm.record(s.fused, label);
                cm_a4c.record(s.fused, p4.label);
                cm_a2c.record(s.fused, p2.label);
                predictions.push(SubjectPrediction {
                    subject_id: s.subject_id.clone(),
                    truth: s.fused,
                    predicted: label,
                    score: p4.score.max(p2.score),
                });
            }
            Ok((
                FoldReport {
                    fold: f,
                    selected: vec![
                        ("a4c".to_string(), a4c.selected),
                        ("a2c".to_string(), a2c.selected),
                    ],
                    metrics: compute_metrics(&cm),
                    cm,
                },
                predictions,
                cm_a4c,
                cm_a2c,
            ))
        })
        .collect();

    let mut folds = Vec::new();
    let mut all_predictions = Vec::new();
    let mut pooled = ConfusionMatrix::default();
    let mut pooled_a4c = ConfusionMatrix::default();
    let mut pooled_a2c = ConfusionMatrix::default();
    for out in fold_outputs {
        let (report, predictions, cm_a4c, cm_a2c) = out?;
        pooled.add(&report.cm);
        pooled_a4c.add(&cm_a4c);
        pooled_a2c.add(&cm_a2c);
        folds.push(report);
        all_predictions.extend(predictions);
    }
    Ok(ExperimentReport {
        mode: EvalMode::MultiviewOr,
        kind: grid.kind,
        seed,
        n_subjects: subjects.len(),
        pooled_metrics: compute_metrics(&pooled),
        pooled,
        folds,
        predictions: all_predictions,
        or_breakdown: Some(OrBreakdown {
            metrics_a4c: compute_metrics(&pooled_a4c),
            metrics_a2c: compute_metrics(&pooled_a2c),
            cm_a4c: pooled_a4c,
            cm_a2c: pooled_a2c,
        }),
    })
}
