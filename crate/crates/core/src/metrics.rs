//! Detection and classification metrics: IoU, scale-adaptive IoU (SIoU),
//! precision/recall/F1 at an SIoU threshold, and Matthews correlation.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::bbox::BBox;

#[derive(Debug, Error, PartialEq)]
pub enum MetricsError {
    #[error("ground-truth box has zero area")]
    ZeroAreaGroundTruth,
    #[error("SIoU parameters out of range: gamma={gamma}, kappa={kappa}")]
    InvalidParams { gamma: f64, kappa: f64 },
    #[error("threshold {0} must lie in (0, 1)")]
    InvalidThreshold(f64),
    #[error("confusion matrix must be square with at least 2 classes")]
    BadConfusionShape,
}

/// Evaluation threshold on SIoU used throughout the benchmark.
pub const DEFAULT_SIOU_THRESHOLD: f64 = 0.40;

/// SIoU shape parameters: `p = 1 − γ·exp(−√(w₁h₁ + w₂h₂) / (√2·κ))`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SIoUParams {
    pub gamma: f64,
    pub kappa: f64,
}

impl Default for SIoUParams {
    fn default() -> Self {
        Self {
            gamma: 0.5,
            kappa: 8f64.sqrt(),
        }
    }
}

impl SIoUParams {
    pub fn new(gamma: f64, kappa: f64) -> Result<Self, MetricsError> {
        if !(gamma > 0.0 && gamma < 1.0 && kappa > 0.0 && kappa.is_finite()) {
            return Err(MetricsError::InvalidParams { gamma, kappa });
        }
        Ok(Self { gamma, kappa })
    }
}

/// Intersection over union; 0 for disjoint boxes.
pub fn iou(a: &BBox, b: &BBox) -> f64 {
    let inter = a.intersection_area(b);
    if inter <= 0.0 {
        return 0.0;
    }
    inter / (a.area() + b.area() - inter)
}

/// Size-dependent exponent applied to IoU.
pub fn siou_exponent(a: &BBox, b: &BBox, params: &SIoUParams) -> f64 {
    let size = (a.area() + b.area()).sqrt();
    1.0 - params.gamma * (-size / (std::f64::consts::SQRT_2 * params.kappa)).exp()
}

/// `IoU^p`; lenient on small boxes, tends to IoU as boxes grow.
pub fn siou(a: &BBox, b: &BBox, params: &SIoUParams) -> f64 {
    let base = iou(a, b);
    if base <= 0.0 {
        return 0.0;
    }
    base.powf(siou_exponent(a, b, params))
}

/// Localization error over object size: L1 distance between the corner
/// vectors `(x_min, y_min, x_max, y_max)` divided by `√(w·h)` of `truth`.
pub fn loc_error_ratio(pred: &BBox, truth: &BBox) -> Result<f64, MetricsError> {
    let omega = truth.area().sqrt();
    if !(omega > 0.0) {
        return Err(MetricsError::ZeroAreaGroundTruth);
    }
    let eps = (pred.x_min - truth.x_min).abs()
        + (pred.y_min - truth.y_min).abs()
        + (pred.x_max() - truth.x_max()).abs()
        + (pred.y_max() - truth.y_max()).abs();
    Ok(eps / omega)
}

/// A scored prediction as seen by the evaluator.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ScoredBox {
    pub bbox: BBox,
    pub score: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Match {
    pub pred: usize,
    pub truth: usize,
    pub siou: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DetectionEval {
    pub tp: usize,
    pub fp: usize,
    #[serde(rename = "fn")]
    pub fn_: usize,
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    pub matches: Vec<Match>,
}

/// Precision, recall and F1 from counts. P is 0 without predictions, R is
/// 0 without truths, F1 is 0 when P + R = 0.
pub fn prf(tp: usize, fp: usize, fn_: usize) -> (f64, f64, f64) {
    let p = if tp + fp == 0 { 0.0 } else { tp as f64 / (tp + fp) as f64 };
    let r = if tp + fn_ == 0 { 0.0 } else { tp as f64 / (tp + fn_) as f64 };
    let f1 = if p + r == 0.0 { 0.0 } else { 2.0 * p * r / (p + r) };
    (p, r, f1)
}

/// Greedy matching in descending score order (ties: lower prediction index).
/// Each prediction takes the unused truth with the highest SIoU (ties: lower
/// truth index) and counts as a true positive iff that SIoU ≥ `threshold`.
pub fn evaluate_detections(
    preds: &[ScoredBox],
    truth: &[BBox],
    threshold: f64,
    params: &SIoUParams,
) -> Result<DetectionEval, MetricsError> {
    if !(threshold > 0.0 && threshold < 1.0) {
        return Err(MetricsError::InvalidThreshold(threshold));
    }
    let mut order: Vec<usize> = (0..preds.len()).collect();
    order.sort_by(|&a, &b| preds[b].score.total_cmp(&preds[a].score).then(a.cmp(&b)));
    let mut used = vec![false; truth.len()];
    let mut matches = Vec::new();
    for pi in order {
        let mut best: Option<(usize, f64)> = None;
        for (ti, t) in truth.iter().enumerate() {
            if used[ti] {
                continue;
            }
            let s = siou(&preds[pi].bbox, t, params);
            if best.map_or(true, |(_, bs)| s > bs) {
                best = Some((ti, s));
            }
        }
        if let Some((ti, s)) = best {
            if s >= threshold {
                used[ti] = true;
                matches.push(Match {
                    pred: pi,
                    truth: ti,
                    siou: s,
                });
            }
        }
    }
    let tp = matches.len();
    let fp = preds.len() - tp;
    let fn_ = truth.len() - tp;
    let (precision, recall, f1) = prf(tp, fp, fn_);
    Ok(DetectionEval {
        tp,
        fp,
        fn_,
        precision,
        recall,
        f1,
        matches,
    })
}

/// Square confusion matrix, rows = truth, columns = prediction.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct ConfusionMatrix {
    pub counts: Vec<Vec<u64>>,
}

impl ConfusionMatrix {
    pub fn zeros(k: usize) -> Self {
        Self {
            counts: vec![vec![0; k]; k],
        }
    }

    /// Binary matrix with class 0 = negative, class 1 = positive.
    pub fn binary(tp: u64, fp: u64, fn_: u64, tn: u64) -> Self {
        Self {
            counts: vec![vec![tn, fp], vec![fn_, tp]],
        }
    }

    pub fn classes(&self) -> usize {
        self.counts.len()
    }

    pub fn add(&mut self, truth: usize, pred: usize) {
        self.counts[truth][pred] += 1;
    }

    pub fn is_square(&self) -> bool {
        self.counts.iter().all(|r| r.len() == self.counts.len())
    }

    pub fn total(&self) -> u64 {
        self.counts.iter().flatten().sum()
    }
}

/// Binary Matthews correlation; 0 when any marginal product is 0.
pub fn mcc_counts(tp: u64, fp: u64, fn_: u64, tn: u64) -> f64 {
    let (tp, fp, fn_, tn) = (tp as f64, fp as f64, fn_ as f64, tn as f64);
    let den = (tp + fp) * (tp + fn_) * (tn + fn_) * (tn + fp);
    if den == 0.0 {
        return 0.0;
    }
    (tn * tp - fp * fn_) / den.sqrt()
}

/// Binary MCC from a 2×2 matrix laid out as [`ConfusionMatrix::binary`].
pub fn mcc(cm: &ConfusionMatrix) -> Result<f64, MetricsError> {
    if cm.classes() != 2 || !cm.is_square() {
        return Err(MetricsError::BadConfusionShape);
    }
    let c = &cm.counts;
    Ok(mcc_counts(c[1][1], c[0][1], c[1][0], c[0][0]))
}

/// Multiclass MCC (Gorodkin's R_K): `(c·s − Σ p_k t_k) / √((s² − Σ p_k²)(s² − Σ t_k²))`
/// with `c` the trace, `s` the total, `t_k` row sums and `p_k` column sums.
pub fn mcc_multiclass(cm: &ConfusionMatrix) -> Result<f64, MetricsError> {
    let k = cm.classes();
    if k < 2 || !cm.is_square() {
        return Err(MetricsError::BadConfusionShape);
    }
    let c = &cm.counts;
    let trace: f64 = (0..k).map(|i| c[i][i] as f64).sum();
    let s = cm.total() as f64;
    let t: Vec<f64> = (0..k).map(|i| c[i].iter().sum::<u64>() as f64).collect();
    let p: Vec<f64> = (0..k).map(|j| (0..k).map(|i| c[i][j]).sum::<u64>() as f64).collect();
    let pt: f64 = p.iter().zip(&t).map(|(a, b)| a * b).sum();
    let pp: f64 = p.iter().map(|a| a * a).sum();
    let tt: f64 = t.iter().map(|a| a * a).sum();
    let den = (s * s - pp) * (s * s - tt);
    if den <= 0.0 {
        return Ok(0.0);
    }
    Ok((trace * s - pt) / den.sqrt())
}

/// Per-granule row of an evaluation report.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GranuleEval {
    pub granule: String,
    pub tp: usize,
    pub fp: usize,
    #[serde(rename = "fn")]
    pub fn_: usize,
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
}

/// Serialized evaluation report.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub threshold: f64,
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    pub per_granule: Vec<GranuleEval>,
    /// Category confusion over matched pairs (truth rows, predicted columns).
    pub confusion: ConfusionMatrix,
    /// Multiclass MCC of `confusion`; absent with fewer than two classes.
    pub mcc: Option<f64>,
}

impl EvalReport {
    /// Pool counts over granules (micro average).
    pub fn from_granules(threshold: f64, per_granule: Vec<GranuleEval>, confusion: ConfusionMatrix) -> Self {
        let tp = per_granule.iter().map(|g| g.tp).sum();
        let fp = per_granule.iter().map(|g| g.fp).sum();
        let fn_ = per_granule.iter().map(|g| g.fn_).sum();
        let (precision, recall, f1) = prf(tp, fp, fn_);
        let mcc = mcc_multiclass(&confusion).ok();
        Self {
            threshold,
            precision,
            recall,
            f1,
            per_granule,
            confusion,
            mcc,
        }
    }
}
