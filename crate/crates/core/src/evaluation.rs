//! Precision-recall analysis, thresholding, k-fold cross validation and the
//! clickable-attribute baseline.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::dataset::LabeledExample;
use crate::model::{fit, predict_scores, EncodedExamples, ModelConfig, ModelError, Network};
use crate::rng::RngStream;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum EvalError {
    #[error("length mismatch: {left} vs {right}")]
    LengthMismatch { left: usize, right: usize },
    #[error("no positive labels; precision-recall curve undefined")]
    NoPositives,
    #[error("only one class present; cannot balance")]
    SingleClass,
    #[error("empty input")]
    Empty,
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PrPoint {
    pub threshold: f64,
    pub precision: f64,
    pub recall: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PrCurve {
    /// Strictly decreasing thresholds, nondecreasing recall.
    pub points: Vec<PrPoint>,
    pub auc: f64,
}

fn check_lengths(a: usize, b: usize) -> Result<(), EvalError> {
    if a != b {
        return Err(EvalError::LengthMismatch { left: a, right: b });
    }
    Ok(())
}

/// Sweeps a threshold over every distinct score (predict positive when
/// `score >= threshold`).
///
/// The area is the trapezoid rule over `(recall, precision)` in sweep order,
/// starting from a point at recall 0 carrying the first point's precision.
pub fn pr_curve(scores: &[f64], labels: &[u8]) -> Result<PrCurve, EvalError> {
    check_lengths(scores.len(), labels.len())?;
    if scores.iter().any(|s| !s.is_finite()) {
        return Err(EvalError::InvalidArgument("scores must be finite".into()));
    }
    let positives = labels.iter().filter(|&&l| l == 1).count();
    if positives == 0 {
        return Err(EvalError::NoPositives);
    }
    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| scores[b].total_cmp(&scores[a]));
    let mut points = Vec::new();
    let (mut tp, mut fp) = (0usize, 0usize);
    let mut i = 0;
    while i < order.len() {
        let t = scores[order[i]];
        while i < order.len() && scores[order[i]] == t {
            if labels[order[i]] == 1 {
                tp += 1;
            } else {
                fp += 1;
            }
            i += 1;
        }
        points.push(PrPoint {
            threshold: t,
            precision: tp as f64 / (tp + fp) as f64,
            recall: tp as f64 / positives as f64,
        });
    }
    let auc = trapezoid_auc(&points);
    Ok(PrCurve { points, auc })
}

fn trapezoid_auc(points: &[PrPoint]) -> f64 {
    let mut auc = 0.0;
    let (mut r0, mut p0) = (0.0, points[0].precision);
    for p in points {
        auc += (p.recall - r0) * (p.precision + p0) / 2.0;
        r0 = p.recall;
        p0 = p.precision;
    }
    auc
}

pub fn f1(precision: f64, recall: f64) -> f64 {
    if precision + recall == 0.0 {
        0.0
    } else {
        2.0 * precision * recall / (precision + recall)
    }
}

/// Threshold with the highest F1 on the curve; ties go to the lower threshold.
pub fn select_threshold(curve: &PrCurve) -> Result<f64, EvalError> {
    let mut best: Option<(f64, f64)> = None;
    for p in &curve.points {
        let f = f1(p.precision, p.recall);
        best = match best {
            None => Some((f, p.threshold)),
            Some((bf, _)) if f > bf + 1e-12 => Some((f, p.threshold)),
            Some((bf, bt)) if f >= bf - 1e-12 => Some((bf.max(f), bt.min(p.threshold))),
            keep => keep,
        };
    }
    best.map(|(_, t)| t).ok_or(EvalError::Empty)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PrecisionRecall {
    pub precision: f64,
    pub recall: f64,
    /// False when nothing was predicted positive; `precision` is then 0.
    pub precision_defined: bool,
    /// False when no label is positive; `recall` is then 0.
    pub recall_defined: bool,
}

pub fn precision_recall(predictions: &[u8], labels: &[u8], positive_class: u8) -> Result<PrecisionRecall, EvalError> {
    check_lengths(predictions.len(), labels.len())?;
    let m = ConfusionMatrix::from_predictions(predictions, labels)?;
    Ok(m.precision_recall(positive_class))
}

/// Counts with class 1 as the positive class.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConfusionMatrix {
    pub true_positive: usize,
    pub false_positive: usize,
    pub true_negative: usize,
    pub false_negative: usize,
}

impl ConfusionMatrix {
    pub fn from_predictions(predictions: &[u8], labels: &[u8]) -> Result<Self, EvalError> {
        check_lengths(predictions.len(), labels.len())?;
        let mut m = Self::default();
        for (&p, &l) in predictions.iter().zip(labels) {
            match (p != 0, l != 0) {
                (true, true) => m.true_positive += 1,
                (true, false) => m.false_positive += 1,
                (false, false) => m.true_negative += 1,
                (false, true) => m.false_negative += 1,
            }
        }
        Ok(m)
    }

    pub fn total(&self) -> usize {
        self.true_positive + self.false_positive + self.true_negative + self.false_negative
    }

    pub fn accuracy(&self) -> f64 {
        if self.total() == 0 {
            return 0.0;
        }
        (self.true_positive + self.true_negative) as f64 / self.total() as f64
    }

    pub fn precision_recall(&self, positive_class: u8) -> PrecisionRecall {
        let (tp, fp, fn_) = if positive_class == 1 {
            (self.true_positive, self.false_positive, self.false_negative)
        } else {
            (self.true_negative, self.false_negative, self.false_positive)
        };
        let ratio = |a: usize, b: usize| if b == 0 { 0.0 } else { a as f64 / b as f64 };
        PrecisionRecall {
            precision: ratio(tp, tp + fp),
            recall: ratio(tp, tp + fn_),
            precision_defined: tp + fp > 0,
            recall_defined: tp + fn_ > 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassMetrics {
    pub class: u8,
    #[serde(flatten)]
    pub metrics: PrecisionRecall,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub kind: String,
    pub fold: Option<usize>,
    pub n: usize,
    pub positive_class: u8,
    pub threshold: Option<f64>,
    pub precision: f64,
    pub recall: f64,
    pub accuracy: f64,
    pub classes: Vec<ClassMetrics>,
    pub confusion: ConfusionMatrix,
    pub pr_curve: Option<PrCurve>,
}

impl EvalReport {
    pub fn from_predictions(
        predictions: &[u8],
        labels: &[u8],
        positive_class: u8,
        threshold: Option<f64>,
        pr_curve: Option<PrCurve>,
    ) -> Result<Self, EvalError> {
        let confusion = ConfusionMatrix::from_predictions(predictions, labels)?;
        let main = confusion.precision_recall(positive_class);
        Ok(Self {
            kind: "eval_report".into(),
            fold: None,
            n: labels.len(),
            positive_class,
            threshold,
            precision: main.precision,
            recall: main.recall,
            accuracy: confusion.accuracy(),
            classes: [1u8, 0]
                .into_iter()
                .map(|class| ClassMetrics {
                    class,
                    metrics: confusion.precision_recall(class),
                })
                .collect(),
            confusion,
            pr_curve,
        })
    }

    /// Thresholds scores and builds the full report including the PR curve.
    pub fn from_scores(scores: &[f64], labels: &[u8], threshold: f64) -> Result<Self, EvalError> {
        let curve = pr_curve(scores, labels)?;
        let predictions: Vec<u8> = scores.iter().map(|&s| u8::from(s >= threshold)).collect();
        Self::from_predictions(&predictions, labels, 1, Some(threshold), Some(curve))
    }
}

/// Seeded shuffle cut into `k` contiguous folds whose sizes differ by at most
/// one. Returns `(train, validation)` index lists, each sorted.
pub fn kfold_split(n: usize, k: usize, seed: u64) -> Result<Vec<(Vec<usize>, Vec<usize>)>, EvalError> {
    if k < 2 || n < k {
        return Err(EvalError::InvalidArgument(format!("need 2 <= k <= n, got k={k}, n={n}")));
    }
    let perm = RngStream::new(seed).fork_named("kfold").permutation(n);
    let (base, extra) = (n / k, n % k);
    let mut folds = Vec::with_capacity(k);
    let mut start = 0;
    for f in 0..k {
        let len = base + usize::from(f < extra);
        let mut val = perm[start..start + len].to_vec();
        let mut train: Vec<usize> = perm[..start].iter().chain(&perm[start + len..]).copied().collect();
        val.sort_unstable();
        train.sort_unstable();
        folds.push((train, val));
        start += len;
    }
    Ok(folds)
}

/// Appends minority-class indices, drawn with replacement, until both classes
/// have equal counts. `labels[i]` is the label of `indices[i]`.
pub fn upsample_minority(indices: &[usize], labels: &[u8], seed: u64) -> Result<Vec<usize>, EvalError> {
    check_lengths(indices.len(), labels.len())?;
    let pos: Vec<usize> = indices.iter().zip(labels).filter(|(_, &l)| l == 1).map(|(&i, _)| i).collect();
    let neg: Vec<usize> = indices.iter().zip(labels).filter(|(_, &l)| l != 1).map(|(&i, _)| i).collect();
    if pos.is_empty() || neg.is_empty() {
        return Err(EvalError::SingleClass);
    }
    let (minority, deficit) = if pos.len() < neg.len() {
        (&pos, neg.len() - pos.len())
    } else {
        (&neg, pos.len() - neg.len())
    };
    let mut rng = RngStream::new(seed).fork_named("upsample");
    let mut out = indices.to_vec();
    out.extend((0..deficit).map(|_| minority[rng.below(minority.len())]));
    Ok(out)
}

/// Uses the declared clickable attribute as the prediction of the human label.
pub fn baseline_clickable(examples: &[LabeledExample]) -> Result<EvalReport, EvalError> {
    if examples.is_empty() {
        return Err(EvalError::Empty);
    }
    let predictions: Vec<u8> = examples.iter().map(|e| e.clickable).collect();
    let labels: Vec<u8> = examples.iter().map(|e| e.human_label).collect();
    let mut report = EvalReport::from_predictions(&predictions, &labels, 1, None, None)?;
    report.kind = "baseline_clickable".into();
    Ok(report)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MeanSd {
    pub mean: f64,
    /// Sample standard deviation (n - 1 denominator); 0 for a single value.
    pub sd: f64,
}

impl MeanSd {
    pub fn of(values: &[f64]) -> Self {
        let n = values.len() as f64;
        let mean = values.iter().sum::<f64>() / n;
        let sd = if values.len() < 2 {
            0.0
        } else {
            (values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0)).sqrt()
        };
        Self { mean, sd }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CrossValidationSummary {
    pub precision: MeanSd,
    pub recall: MeanSd,
    pub accuracy: MeanSd,
    pub auc: MeanSd,
    pub threshold: MeanSd,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CrossValidation {
    pub kind: String,
    pub k: usize,
    pub seed: u64,
    pub folds: Vec<EvalReport>,
    pub summary: CrossValidationSummary,
}

/// Trains one model per fold on the (upsampled) training split, picks that
/// fold's threshold from its validation PR curve, and reports on validation.
pub fn cross_validate(data: &EncodedExamples, config: &ModelConfig, k: usize) -> Result<CrossValidation, ModelError> {
    let folds = kfold_split(data.len(), k, config.seed)?;
    let mut reports = Vec::with_capacity(k);
    for (f, (train_idx, val_idx)) in folds.iter().enumerate() {
        log::info!("fold {}/{k}: {} train, {} validation", f + 1, train_idx.len(), val_idx.len());
        let mut fold_config = config.clone();
        fold_config.seed = RngStream::new(config.seed).fork_named("fold").fork(f as u64).seed();
        let mut network = Network::build(&fold_config)?;
        fit(&mut network, data, train_idx)?;
        let scores = predict_scores(&network, data, val_idx)?;
        let labels: Vec<u8> = val_idx.iter().map(|&i| data.labels[i]).collect();
        let threshold = select_threshold(&pr_curve(&scores, &labels)?)?;
        let mut report = EvalReport::from_scores(&scores, &labels, threshold)?;
        report.fold = Some(f);
        log::info!(
            "fold {}: precision {:.3} recall {:.3} threshold {:.3}",
            f + 1,
            report.precision,
            report.recall,
            threshold
        );
        reports.push(report);
    }
    let col = |g: fn(&EvalReport) -> f64| MeanSd::of(&reports.iter().map(g).collect::<Vec<_>>());
    let summary = CrossValidationSummary {
        precision: col(|r| r.precision),
        recall: col(|r| r.recall),
        accuracy: col(|r| r.accuracy),
        auc: col(|r| r.pr_curve.as_ref().map_or(0.0, |c| c.auc)),
        threshold: col(|r| r.threshold.unwrap_or(0.0)),
    };
    Ok(CrossValidation {
        kind: "cross_validation".into(),
        k,
        seed: config.seed,
        folds: reports,
        summary,
    })
}
