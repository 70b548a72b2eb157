//! Evaluation math: IoU, greedy matching, precision, AP, Dice and
//! dimension errors.

use num_rational::Ratio;
use serde::{Deserialize, Serialize};

use crate::geometry::{Cuboid3D, Dims, Rect2D, ScoredBox2D};
use crate::micron::Microns;
use crate::segment::Mask3D;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum MetricsError {
    #[error("precision is undefined without predictions")]
    UndefinedPrecision,
    #[error("average precision is undefined without ground truth")]
    NoGroundTruth,
    #[error("mask dimensions differ: {0} vs {1}")]
    DimMismatch(Dims, Dims),
    #[error("length mismatch: {0} measured vs {1} ground truth")]
    LengthMismatch(usize, usize),
}

/// Overlap as exact pixel/voxel counts.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Iou {
    pub intersection: u64,
    pub union: u64,
}

impl Iou {
    pub fn ratio(&self) -> Ratio<u64> {
        if self.union == 0 {
            Ratio::from_integer(0)
        } else {
            Ratio::new(self.intersection, self.union)
        }
    }

    pub fn value(&self) -> f64 {
        if self.union == 0 {
            0.0
        } else {
            self.intersection as f64 / self.union as f64
        }
    }
}

fn overlap_1d(a0: usize, a1: usize, b0: usize, b1: usize) -> u64 {
    // Inclusive intervals.
    let lo = a0.max(b0);
    let hi = a1.min(b1);
    if lo > hi {
        0
    } else {
        (hi - lo + 1) as u64
    }
}

pub fn iou_rect(a: &Rect2D, b: &Rect2D) -> Iou {
    let inter = overlap_1d(a.x, a.x_max(), b.x, b.x_max()) * overlap_1d(a.y, a.y_max(), b.y, b.y_max());
    let area = |r: &Rect2D| (r.w * r.h) as u64;
    Iou {
        intersection: inter,
        union: area(a) + area(b) - inter,
    }
}

/// 2D IoU; boxes on different slices or axes never overlap.
pub fn iou2d(a: &ScoredBox2D, b: &ScoredBox2D) -> Iou {
    if a.axis != b.axis || a.slice_index != b.slice_index {
        return Iou {
            intersection: 0,
            union: a.area() + b.area(),
        };
    }
    iou_rect(&a.rect(), &b.rect())
}

pub fn iou3d(a: &Cuboid3D, b: &Cuboid3D) -> Iou {
    let (sa, la, sb, lb) = (a.start(), a.last(), b.start(), b.last());
    let inter: u64 = (0..3).map(|i| overlap_1d(sa[i], la[i], sb[i], lb[i])).product();
    Iou {
        intersection: inter,
        union: a.volume() + b.volume() - inter,
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TruePositive {
    pub pred: usize,
    pub gt: usize,
    pub iou: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MatchResult {
    pub true_positives: Vec<TruePositive>,
    pub false_positives: Vec<usize>,
    pub false_negatives: Vec<usize>,
    pub iou_threshold: f64,
}

impl MatchResult {
    pub fn is_tp(&self, pred: usize) -> bool {
        self.true_positives.iter().any(|t| t.pred == pred)
    }
}

/// Prediction order used for matching: descending score, ties by index.
fn score_order(scores: &[f64]) -> Vec<usize> {
    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| scores[b].total_cmp(&scores[a]).then(a.cmp(&b)));
    order
}

/// Greedy matching with a caller-supplied IoU function. Each prediction, by
/// descending score, takes the unmatched ground truth with the highest IoU ≥
/// `iou_threshold` (ties to the lower gt index).
pub fn match_by<P, G>(
    preds: &[P],
    scores: &[f64],
    gts: &[G],
    iou_threshold: f64,
    iou: impl Fn(&P, &G) -> Iou,
) -> MatchResult {
    let mut used = vec![false; gts.len()];
    let mut tps = Vec::new();
    let mut fps = Vec::new();
    for p in score_order(scores) {
        let mut best: Option<(usize, Iou)> = None;
        for (g, gt) in gts.iter().enumerate() {
            if used[g] {
                continue;
            }
            let v = iou(&preds[p], gt);
            if v.value() < iou_threshold {
                continue;
            }
            if best.is_none_or(|(_, b)| v.ratio() > b.ratio()) {
                best = Some((g, v));
            }
        }
        match best {
            Some((g, v)) => {
                used[g] = true;
                tps.push(TruePositive {
                    pred: p,
                    gt: g,
                    iou: v.value(),
                });
            }
            None => fps.push(p),
        }
    }
    MatchResult {
        true_positives: tps,
        false_positives: fps,
        false_negatives: (0..gts.len()).filter(|&g| !used[g]).collect(),
        iou_threshold,
    }
}

pub fn match_detections_2d(preds: &[ScoredBox2D], gts: &[ScoredBox2D], iou_threshold: f64) -> MatchResult {
    let scores: Vec<f64> = preds.iter().map(|p| p.score).collect();
    match_by(preds, &scores, gts, iou_threshold, iou2d)
}

pub fn match_detections_3d(preds: &[Cuboid3D], gts: &[Cuboid3D], iou_threshold: f64) -> MatchResult {
    let scores: Vec<f64> = preds.iter().map(|p| p.score).collect();
    match_by(preds, &scores, gts, iou_threshold, iou3d)
}

pub fn precision(m: &MatchResult) -> Result<f64, MetricsError> {
    let tp = m.true_positives.len();
    let n = tp + m.false_positives.len();
    if n == 0 {
        return Err(MetricsError::UndefinedPrecision);
    }
    Ok(tp as f64 / n as f64)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PrPoint {
    pub recall: f64,
    pub precision: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ApResult {
    /// Area under the interpolated precision-recall curve.
    pub ap_standard: f64,
    /// Mean of the precision values after each prediction in score order.
    pub ap_paper_literal: f64,
    pub curve: Vec<PrPoint>,
}

/// Both AP variants for one class, from an existing match.
pub fn average_precision_from(m: &MatchResult, scores: &[f64], n_gt: usize) -> Result<ApResult, MetricsError> {
    if n_gt == 0 {
        return Err(MetricsError::NoGroundTruth);
    }
    let order = score_order(scores);
    let mut curve = Vec::with_capacity(order.len());
    let mut tp = 0usize;
    for (rank, &p) in order.iter().enumerate() {
        if m.is_tp(p) {
            tp += 1;
        }
        curve.push(PrPoint {
            recall: tp as f64 / n_gt as f64,
            precision: tp as f64 / (rank + 1) as f64,
        });
    }

    // Precision envelope from the right, then sum over recall steps.
    let mut envelope: Vec<f64> = curve.iter().map(|p| p.precision).collect();
    for i in (0..envelope.len().saturating_sub(1)).rev() {
        envelope[i] = envelope[i].max(envelope[i + 1]);
    }
    let mut ap = 0.0;
    let mut prev_recall = 0.0;
    for (p, &env) in curve.iter().zip(&envelope) {
        ap += (p.recall - prev_recall) * env;
        prev_recall = p.recall;
    }
    let literal = if curve.is_empty() {
        0.0
    } else {
        curve.iter().map(|p| p.precision).sum::<f64>() / curve.len() as f64
    };
    Ok(ApResult {
        ap_standard: ap,
        ap_paper_literal: literal,
        curve,
    })
}

pub fn average_precision_2d(
    preds: &[ScoredBox2D],
    gts: &[ScoredBox2D],
    iou_threshold: f64,
) -> Result<ApResult, MetricsError> {
    let m = match_detections_2d(preds, gts, iou_threshold);
    let scores: Vec<f64> = preds.iter().map(|p| p.score).collect();
    average_precision_from(&m, &scores, gts.len())
}

pub fn average_precision_3d(
    preds: &[Cuboid3D],
    gts: &[Cuboid3D],
    iou_threshold: f64,
) -> Result<ApResult, MetricsError> {
    let m = match_detections_3d(preds, gts, iou_threshold);
    let scores: Vec<f64> = preds.iter().map(|p| p.score).collect();
    average_precision_from(&m, &scores, gts.len())
}

/// Exact Dice as a ratio of voxel counts.
pub fn dice_ratio(x: &Mask3D, y: &Mask3D) -> Result<Ratio<u64>, MetricsError> {
    if x.dims() != y.dims() {
        return Err(MetricsError::DimMismatch(x.dims(), y.dims()));
    }
    let (mut nx, mut ny, mut both) = (0u64, 0u64, 0u64);
    for (&a, &b) in x.bits().iter().zip(y.bits()) {
        nx += a as u64;
        ny += b as u64;
        both += (a && b) as u64;
    }
    if nx + ny == 0 {
        return Ok(Ratio::from_integer(1));
    }
    Ok(Ratio::new(2 * both, nx + ny))
}

pub fn dice(x: &Mask3D, y: &Mask3D) -> Result<f64, MetricsError> {
    let r = dice_ratio(x, y)?;
    Ok(*r.numer() as f64 / *r.denom() as f64)
}

/// Physical W, H, D of one structure.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Dimensions {
    pub w: Microns,
    pub h: Microns,
    pub d: Microns,
}

impl Dimensions {
    pub fn new(w: Microns, h: Microns, d: Microns) -> Self {
        Dimensions { w, h, d }
    }

    pub fn as_array(&self) -> [Microns; 3] {
        [self.w, self.h, self.d]
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DimensionErrors {
    /// |measured - gt| per structure, in (W, H, D) order.
    pub per_structure: Vec<[Microns; 3]>,
    pub mae_um: f64,
    pub mse_um2: f64,
    pub rmse_um: f64,
    #[serde(skip)]
    pub mae_exact: Ratio<i128>,
    #[serde(skip)]
    pub mse_exact: Ratio<i128>,
}

impl DimensionErrors {
    /// Errors flattened in structure-major, W/H/D order.
    pub fn flat(&self) -> Vec<Microns> {
        self.per_structure.iter().flatten().copied().collect()
    }
}

fn ratio_f64(r: &Ratio<i128>) -> f64 {
    *r.numer() as f64 / *r.denom() as f64
}

pub fn dimension_errors(measured: &[Dimensions], gt: &[Dimensions]) -> Result<DimensionErrors, MetricsError> {
    if measured.len() != gt.len() {
        return Err(MetricsError::LengthMismatch(measured.len(), gt.len()));
    }
    let per_structure: Vec<[Microns; 3]> = measured
        .iter()
        .zip(gt)
        .map(|(m, g)| {
            let (m, g) = (m.as_array(), g.as_array());
            [m[0].abs_diff(g[0]), m[1].abs_diff(g[1]), m[2].abs_diff(g[2])]
        })
        .collect();
    let n = (per_structure.len() * 3) as i128;
    let (mae_exact, mse_exact) = if n == 0 {
        (Ratio::from_integer(0), Ratio::from_integer(0))
    } else {
        let scale = crate::micron::SCALE as i128;
        let sum: i128 = per_structure.iter().flatten().map(|e| e.units() as i128).sum();
        let sq: i128 = per_structure
            .iter()
            .flatten()
            .map(|e| (e.units() as i128) * (e.units() as i128))
            .sum();
        (Ratio::new(sum, n * scale), Ratio::new(sq, n * scale * scale))
    };
    let mse = ratio_f64(&mse_exact);
    Ok(DimensionErrors {
        per_structure,
        mae_um: ratio_f64(&mae_exact),
        mse_um2: mse,
        rmse_um: mse.sqrt(),
        mae_exact,
        mse_exact,
    })
}
