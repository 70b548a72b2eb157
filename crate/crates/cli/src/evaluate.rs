//! `evaluate`: detection AP, segmentation Dice and metrology errors against
//! ground truth.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use clap::{Args, ValueEnum};
use serde::Serialize;

use xrm3d::components::Connectivity;
use xrm3d::detect::{self, DetectorConfig, ScoreMode};
use xrm3d::io::{self, GroundTruth, IoError};
use xrm3d::metrics::{self, DimensionErrors, Dimensions, MatchResult};
use xrm3d::metrology::MetrologyReport;
use xrm3d::segment::{self, Mask3D};
use xrm3d::threshold::ThresholdMode;
use xrm3d::{Axis, Cuboid3D, Microns, ScoredBox2D};

use crate::error::CliError;
use crate::manifest::SegmentationManifest;
use crate::AxisArg;

#[derive(Clone, Copy, ValueEnum)]
pub enum Mode {
    Detect,
    Segment,
    Metrology,
}

#[derive(Args)]
pub struct EvaluateArgs {
    #[arg(long, value_enum)]
    mode: Mode,
    /// Predictions: detections JSON (detect), manifest JSON or mask container
    /// (segment), CSV or report JSON (metrology).
    #[arg(long)]
    input: PathBuf,
    /// Ground truth: gt JSON, or a W/H/D CSV in metrology mode.
    #[arg(long)]
    gt: Option<PathBuf>,
    /// Summary JSON; stdout when absent.
    #[arg(long)]
    output: Option<PathBuf>,
    #[arg(long, default_value_t = 0.5)]
    iou_threshold: f64,
    /// Slicing axis of the ground-truth boxes for empty 2D predictions.
    #[arg(long, value_enum, default_value = "z")]
    axis: AxisArg,
    /// Class compared when the prediction is a single mask container.
    #[arg(long = "class", default_value_t = 0)]
    class_index: usize,
}

#[derive(Debug, Serialize)]
struct ClassSummary {
    #[serde(rename = "class")]
    class_index: usize,
    name: String,
    n_pred: usize,
    n_gt: usize,
    #[serde(skip_serializing_if = "Option::is_none")]
    ap_standard: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    ap_paper_literal: Option<f64>,
    /// Mean IoU over matched pairs, for cuboids or for slice boxes.
    #[serde(skip_serializing_if = "Option::is_none")]
    mean_3d_iou: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    mean_2d_iou: Option<f64>,
    #[serde(skip_serializing_if = "Vec::is_empty")]
    dice: Vec<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    mean_dice: Option<f64>,
}

impl ClassSummary {
    fn new(class_index: usize, name: &str) -> Self {
        ClassSummary {
            class_index,
            name: name.to_string(),
            n_pred: 0,
            n_gt: 0,
            ap_standard: None,
            ap_paper_literal: None,
            mean_3d_iou: None,
            mean_2d_iou: None,
            dice: Vec::new(),
            mean_dice: None,
        }
    }
}

#[derive(Debug, Serialize)]
struct StructureErrors {
    structure: String,
    measured: Dimensions,
    gt: Dimensions,
    abs_error_um: [Microns; 3],
}

#[derive(Debug, Serialize)]
struct Summary {
    mode: &'static str,
    #[serde(skip_serializing_if = "Option::is_none")]
    volume_id: Option<String>,
    /// `3d` for cuboids, `2d` for per-slice boxes.
    #[serde(skip_serializing_if = "Option::is_none")]
    level: Option<&'static str>,
    #[serde(skip_serializing_if = "Option::is_none")]
    iou_threshold: Option<f64>,
    #[serde(skip_serializing_if = "Vec::is_empty")]
    classes: Vec<ClassSummary>,
    #[serde(skip_serializing_if = "Option::is_none")]
    map_standard: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    map_paper_literal: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    mean_dice: Option<f64>,
    #[serde(skip_serializing_if = "Vec::is_empty")]
    structures: Vec<StructureErrors>,
    #[serde(skip_serializing_if = "Option::is_none")]
    dimension_errors: Option<DimensionErrors>,
}

impl Summary {
    fn new(mode: &'static str) -> Self {
        Summary {
            mode,
            volume_id: None,
            level: None,
            iou_threshold: None,
            classes: Vec::new(),
            map_standard: None,
            map_paper_literal: None,
            mean_dice: None,
            structures: Vec::new(),
            dimension_errors: None,
        }
    }
}

fn mean(values: impl IntoIterator<Item = f64>) -> Option<f64> {
    let (sum, n) = values.into_iter().fold((0.0, 0usize), |(s, n), v| (s + v, n + 1));
    (n > 0).then(|| sum / n as f64)
}

fn require_gt(a: &EvaluateArgs) -> Result<&Path, CliError> {
    a.gt
        .as_deref()
        .ok_or_else(|| CliError::malformed("--gt is required for this input"))
}

pub fn evaluate(a: EvaluateArgs) -> Result<(), CliError> {
    if !(a.iou_threshold > 0.0 && a.iou_threshold <= 1.0) {
        return Err(CliError::malformed(format!(
            "--iou-threshold must be in (0, 1], got {}",
            a.iou_threshold
        )));
    }
    let summary = match a.mode {
        Mode::Detect => evaluate_detect(&a)?,
        Mode::Segment => evaluate_segment(&a)?,
        Mode::Metrology => evaluate_metrology(&a)?,
    };
    let mut text = serde_json::to_string_pretty(&summary).expect("summary serializes");
    text.push('\n');
    match &a.output {
        Some(p) => std::fs::write(p, text).map_err(|e| CliError::Io(format!("{}: {e}", p.display()))),
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

enum Predictions {
    Cuboids(Vec<Cuboid3D>),
    Boxes(Vec<ScoredBox2D>),
}

fn load_predictions(path: &Path) -> Result<Predictions, CliError> {
    match io::load_detections_3d(path) {
        Ok(d) => Ok(Predictions::Cuboids(d.boxes)),
        Err(IoError::MalformedDocument { reason: r3, .. }) => match detect::import_detections(path) {
            Ok(d) => Ok(Predictions::Boxes(d.boxes)),
            Err(e) => Err(CliError::malformed(format!(
                "{} is neither a 3D nor a 2D detections document ({r3}; {e})",
                path.display()
            ))),
        },
        Err(e) => Err(e.into()),
    }
}

fn load_gt_masks(gt_path: &Path, gt: &GroundTruth) -> Result<BTreeMap<usize, Mask3D>, CliError> {
    let mut masks = BTreeMap::new();
    for r in &gt.mask_refs {
        let m = segment::load_mask(GroundTruth::mask_path(gt_path, r))?;
        if masks.insert(r.class_index, m).is_some() {
            return Err(CliError::malformed(format!("class {} has two reference masks", r.class_index)));
        }
    }
    Ok(masks)
}

/// Per-slice component boxes of each class mask.
fn gt_boxes_2d(masks: &BTreeMap<usize, Mask3D>, axis: Axis) -> Result<Vec<ScoredBox2D>, CliError> {
    let mut out = Vec::new();
    for (&class_index, m) in masks {
        let cfg = DetectorConfig {
            threshold: ThresholdMode::Fixed(0.5),
            connectivity: Connectivity::Eight,
            min_area: 1,
            score_mode: ScoreMode::ConstantOne,
            class_index,
            smoothing_radius: 0,
        };
        out.extend(detect::detect_volume(&m.to_volume(Microns::from_f64(1.0)), axis, &cfg)?);
    }
    Ok(out)
}

fn fill_ap(
    s: &mut ClassSummary,
    n_gt: usize,
    scores: &[f64],
    m: &MatchResult,
) -> Result<(), CliError> {
    s.n_pred = scores.len();
    s.n_gt = n_gt;
    if n_gt > 0 {
        let ap = metrics::average_precision_from(m, scores, n_gt)?;
        s.ap_standard = Some(ap.ap_standard);
        s.ap_paper_literal = Some(ap.ap_paper_literal);
    }
    Ok(())
}

fn evaluate_detect(a: &EvaluateArgs) -> Result<Summary, CliError> {
    let gt_path = require_gt(a)?;
    let preds = load_predictions(&a.input)?;
    let gt = io::load_ground_truth(gt_path)?;
    let mut summary = Summary::new("detect");
    summary.volume_id = Some(gt.volume_id.clone());
    summary.iou_threshold = Some(a.iou_threshold);

    let class_count = gt.classes.len();
    let check_class = |c: usize| {
        if c >= class_count {
            Err(CliError::malformed(format!("prediction class {c} but gt declares {class_count} classes")))
        } else {
            Ok(())
        }
    };
    match preds {
        Predictions::Cuboids(preds) => {
            summary.level = Some("3d");
            let gts = gt.cuboids();
            for p in &preds {
                check_class(p.class_index)?;
            }
            for k in 0..class_count {
                let p: Vec<Cuboid3D> = preds.iter().filter(|c| c.class_index == k).copied().collect();
                let g: Vec<Cuboid3D> = gts.iter().filter(|c| c.class_index == k).copied().collect();
                let m = metrics::match_detections_3d(&p, &g, a.iou_threshold);
                let scores: Vec<f64> = p.iter().map(|c| c.score).collect();
                let mut s = ClassSummary::new(k, gt.class_name(k));
                fill_ap(&mut s, g.len(), &scores, &m)?;
                s.mean_3d_iou = mean(m.true_positives.iter().map(|t| t.iou));
                summary.classes.push(s);
            }
        }
        Predictions::Boxes(preds) => {
            summary.level = Some("2d");
            let axis = match preds.first() {
                Some(b) => b.axis,
                None => a.axis.into(),
            };
            if let Some(b) = preds.iter().find(|b| b.axis != axis) {
                return Err(CliError::malformed(format!("predictions mix axes {axis} and {}", b.axis)));
            }
            for p in &preds {
                check_class(p.class_index)?;
            }
            let gts = gt_boxes_2d(&load_gt_masks(gt_path, &gt)?, axis)?;
            for k in 0..class_count {
                let p: Vec<ScoredBox2D> = preds.iter().filter(|b| b.class_index == k).copied().collect();
                let g: Vec<ScoredBox2D> = gts.iter().filter(|b| b.class_index == k).copied().collect();
                let m = metrics::match_detections_2d(&p, &g, a.iou_threshold);
                let scores: Vec<f64> = p.iter().map(|b| b.score).collect();
                let mut s = ClassSummary::new(k, gt.class_name(k));
                fill_ap(&mut s, g.len(), &scores, &m)?;
                s.mean_2d_iou = mean(m.true_positives.iter().map(|t| t.iou));
                summary.classes.push(s);
            }
        }
    }
    summary.map_standard = mean(summary.classes.iter().filter_map(|c| c.ap_standard));
    summary.map_paper_literal = mean(summary.classes.iter().filter_map(|c| c.ap_paper_literal));
    Ok(summary)
}

fn is_json(path: &Path) -> bool {
    path.extension().is_some_and(|e| e == "json")
}

fn evaluate_segment(a: &EvaluateArgs) -> Result<Summary, CliError> {
    let gt_path = require_gt(a)?;
    let gt = io::load_ground_truth(gt_path)?;
    let masks = load_gt_masks(gt_path, &gt)?;
    let class_mask = |k: usize| {
        masks
            .get(&k)
            .ok_or_else(|| CliError::malformed(format!("gt has no reference mask for class {k}")))
    };
    let mut per_class: BTreeMap<usize, Vec<f64>> = BTreeMap::new();
    if is_json(&a.input) {
        let doc: SegmentationManifest = io::load_json(&a.input)?;
        for roi in &doc.rois {
            let k = roi.detection.class_index;
            let pred = doc.load_mask(&a.input, roi)?;
            let reference = class_mask(k)?.reframe(&roi.frame);
            per_class.entry(k).or_default().push(metrics::dice(&pred, &reference)?);
        }
    } else {
        let pred = segment::load_mask(&a.input)?;
        let k = a.class_index;
        per_class.entry(k).or_default().push(metrics::dice(&pred, class_mask(k)?)?);
    }

    let mut summary = Summary::new("segment");
    summary.volume_id = Some(gt.volume_id.clone());
    for (k, dice) in per_class {
        let mut s = ClassSummary::new(k, gt.class_name(k));
        s.n_pred = dice.len();
        s.mean_dice = mean(dice.iter().copied());
        s.dice = dice;
        summary.classes.push(s);
    }
    summary.mean_dice = mean(summary.classes.iter().flat_map(|c| c.dice.iter().copied()));
    Ok(summary)
}

fn read_rows(path: &Path) -> Result<Vec<csv::StringRecord>, CliError> {
    let mut reader = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .comment(Some(b'#'))
        .from_path(path)?;
    reader.records().map(|r| r.map_err(CliError::from)).collect()
}

fn parse_dims(row: &csv::StringRecord, from: usize, path: &Path) -> Result<Dimensions, CliError> {
    let field = |i: usize| -> Result<Microns, CliError> {
        let cell = row.get(i).unwrap_or("");
        cell.parse().map_err(|e| {
            CliError::malformed(format!("{}: row {:?}: column {}: {e}", path.display(), row.get(0).unwrap_or(""), i + 1))
        })
    };
    Ok(Dimensions::new(field(from)?, field(from + 1)?, field(from + 2)?))
}

/// Structure name, measured and ground-truth dimensions.
type Pair = (String, Dimensions, Dimensions);

/// Either one 7-column CSV (structure, W, H, D, GT W, GT H, GT D) or a
/// 4-column measured CSV plus a 4-column gt CSV matched by row.
fn pairs_from_csv(a: &EvaluateArgs) -> Result<Vec<Pair>, CliError> {
    let rows = read_rows(&a.input)?;
    let width = rows.first().map_or(7, |r| r.len());
    match width {
        7 => rows
            .iter()
            .map(|r| Ok((r[0].to_string(), parse_dims(r, 1, &a.input)?, parse_dims(r, 4, &a.input)?)))
            .collect(),
        4 => {
            let gt_path = require_gt(a)?;
            let gt_rows = read_rows(gt_path)?;
            if gt_rows.len() != rows.len() {
                return Err(CliError::malformed(format!(
                    "{} measured rows but {} ground-truth rows",
                    rows.len(),
                    gt_rows.len()
                )));
            }
            rows.iter()
                .zip(&gt_rows)
                .map(|(m, g)| {
                    if g.len() != 4 || m[0] != g[0] {
                        return Err(CliError::malformed(format!(
                            "ground-truth row {:?} does not match measured row {:?}",
                            g.get(0).unwrap_or(""),
                            &m[0]
                        )));
                    }
                    Ok((m[0].to_string(), parse_dims(m, 1, &a.input)?, parse_dims(g, 1, gt_path)?))
                })
                .collect()
        }
        n => Err(CliError::malformed(format!(
            "{}: expected 4 or 7 columns, found {n}",
            a.input.display()
        ))),
    }
}

fn pairs_from_report(a: &EvaluateArgs) -> Result<Vec<Pair>, CliError> {
    let report: MetrologyReport = io::load_json(&a.input)?;
    if report.records.iter().all(|r| r.ground_truth.is_none()) && !report.records.is_empty() {
        return Err(CliError::malformed("report has no ground-truth comparisons; run measure with --gt"));
    }
    Ok(report
        .records
        .iter()
        .filter_map(|r| {
            let g = r.ground_truth.as_ref()?;
            Some((
                r.roi_id.clone(),
                Dimensions::new(r.w_um, r.h_um, r.d_um),
                Dimensions::new(g.w_um, g.h_um, g.d_um),
            ))
        })
        .collect())
}

fn evaluate_metrology(a: &EvaluateArgs) -> Result<Summary, CliError> {
    let pairs = if is_json(&a.input) {
        pairs_from_report(a)?
    } else {
        pairs_from_csv(a)?
    };
    let measured: Vec<Dimensions> = pairs.iter().map(|p| p.1).collect();
    let truth: Vec<Dimensions> = pairs.iter().map(|p| p.2).collect();
    let errors = metrics::dimension_errors(&measured, &truth)?;
    let mut summary = Summary::new("metrology");
    summary.structures = pairs
        .into_iter()
        .zip(&errors.per_structure)
        .map(|((structure, measured, gt), e)| StructureErrors {
            structure,
            measured,
            gt,
            abs_error_um: *e,
        })
        .collect();
    summary.dimension_errors = Some(errors);
    Ok(summary)
}
