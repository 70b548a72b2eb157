//! Per-ROI metrology: mask cleanup, best contour, tight rectangle, depth
//! extent and physical dimensions.

use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::components::{self, Connectivity};
use crate::geometry::{Axis, Cuboid3D, Rect2D};
use crate::metrics::{self, DimensionErrors, Dimensions};
use crate::micron::Microns;
use crate::morphology::{self, Mask2D};
use crate::segment::Mask3D;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum MetrologyError {
    #[error("mask has no foreground")]
    EmptyMask,
    #[error("contour has no points")]
    EmptyContour,
    #[error("every slice is empty after cleanup")]
    EmptyAfterCleanup,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct MetrologyConfig {
    /// Opening half-size; 1 gives a 3×3 square.
    pub radius: usize,
}

impl Default for MetrologyConfig {
    fn default() -> Self {
        MetrologyConfig { radius: 1 }
    }
}

/// Opening, then only the largest 8-connected component is kept.
pub fn clean_mask(m: &Mask2D, cfg: &MetrologyConfig) -> Mask2D {
    let opened = morphology::open(m, cfg.radius);
    let labeling = components::label(&opened, Connectivity::Eight);
    match labeling.largest() {
        Some(l) => labeling.component_mask(l),
        None => opened,
    }
}

// Neighbour offsets, counterclockwise on screen (y grows downward).
const DIRS: [(i64, i64); 8] = [(-1, 0), (-1, 1), (0, 1), (1, 1), (1, 0), (1, -1), (0, -1), (-1, -1)];

fn dir_index(dx: i64, dy: i64) -> usize {
    DIRS.iter().position(|&d| d == (dx, dy)).expect("backtrack pixel is a neighbour")
}

/// Outer boundary of the largest 8-connected component, traced
/// counterclockwise from its smallest (y, x) pixel. Points are `(x, y)`.
pub fn best_contour(m: &Mask2D) -> Result<Vec<(usize, usize)>, MetrologyError> {
    let labeling = components::label(m, Connectivity::Eight);
    let label = labeling.largest().ok_or(MetrologyError::EmptyMask)?;
    let anchor = labeling.components[label as usize - 1].anchor;
    let (w, h) = (m.w as i64, m.h as i64);
    let inside = |x: i64, y: i64| x >= 0 && y >= 0 && x < w && y < h && labeling.label(x as usize, y as usize) == label;

    // Moore-neighbour step: circle around `c` from just past the backtrack.
    let step = |c: (i64, i64), back: usize| -> Option<((i64, i64), usize)> {
        for k in 1..=8 {
            let d = (back + k) % 8;
            let p = (c.0 + DIRS[d].0, c.1 + DIRS[d].1);
            if inside(p.0, p.1) {
                let prev = DIRS[(d + 7) % 8];
                let b = (c.0 + prev.0, c.1 + prev.1);
                return Some((p, dir_index(b.0 - p.0, b.1 - p.1)));
            }
        }
        None
    };

    let start = (anchor.0 as i64, anchor.1 as i64);
    // West of the anchor is background: it is the first pixel in raster order.
    let Some((second, back)) = step(start, 0) else {
        return Ok(vec![anchor]);
    };
    let mut contour = vec![anchor];
    let (mut c, mut b) = (second, back);
    loop {
        let (next, nb) = step(c, b).expect("a pixel with a neighbour keeps one");
        if c == start && next == second {
            break;
        }
        contour.push((c.0 as usize, c.1 as usize));
        c = next;
        b = nb;
    }
    Ok(contour)
}

pub fn tight_rect(contour: &[(usize, usize)]) -> Result<Rect2D, MetrologyError> {
    let (&first, rest) = contour.split_first().ok_or(MetrologyError::EmptyContour)?;
    let (mut x0, mut y0, mut x1, mut y1) = (first.0, first.1, first.0, first.1);
    for &(x, y) in rest {
        x0 = x0.min(x);
        x1 = x1.max(x);
        y0 = y0.min(y);
        y1 = y1.max(y);
    }
    Ok(Rect2D {
        x: x0,
        y: y0,
        w: x1 - x0 + 1,
        h: y1 - y0 + 1,
    })
}

/// What cleanup did while measuring one ROI.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct CleanupFlags {
    /// Empty slices strictly between the first and last nonempty slice.
    pub dropout_slices: Vec<usize>,
    /// Foreground pixels removed by opening or component selection.
    pub removed_pixels: usize,
    /// Slices where more than one component survived opening.
    pub multi_component_slices: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RoiMeasurement {
    /// Measured box in parent-volume coordinates.
    pub cuboid: Cuboid3D,
    pub flags: CleanupFlags,
}

/// Scans axial slices in ascending z, cleans each and merges the per-slice
/// tight rectangles. Slice indices in the result are parent coordinates.
pub fn measure_roi(mask: &Mask3D, cfg: &MetrologyConfig) -> Result<RoiMeasurement, MetrologyError> {
    let origin = mask.origin();
    let mut flags = CleanupFlags::default();
    let mut footprint: Option<Rect2D> = None;
    let mut first = None;
    let mut last = 0;
    let mut nonempty = Vec::new();
    for z in 0..mask.dims().nz {
        let raw = mask.slice(Axis::Z, z);
        let opened = morphology::open(&raw, cfg.radius);
        let labeling = components::label(&opened, Connectivity::Eight);
        if labeling.components.len() > 1 {
            flags.multi_component_slices += 1;
        }
        let cleaned = match labeling.largest() {
            Some(l) => labeling.component_mask(l),
            None => opened,
        };
        let kept = cleaned.count();
        flags.removed_pixels += raw.count() - kept;
        if kept == 0 {
            continue;
        }
        let rect = tight_rect(&best_contour(&cleaned)?)?;
        footprint = Some(footprint.map_or(rect, |f| f.union(&rect)));
        first.get_or_insert(z);
        last = z;
        nonempty.push(z);
    }
    let (Some(first), Some(fp)) = (first, footprint) else {
        return Err(MetrologyError::EmptyAfterCleanup);
    };
    flags.dropout_slices = (first..=last)
        .filter(|z| nonempty.binary_search(z).is_err())
        .map(|z| z + origin[2])
        .collect();
    let cuboid = Cuboid3D::new(0, [fp.x, fp.y, first], [fp.w, fp.h, last - first + 1]).translated(origin);
    Ok(RoiMeasurement { cuboid, flags })
}

/// Physical W, H, D of a cuboid; exact decimal arithmetic.
pub fn to_microns(c: &Cuboid3D, voxel_size: Microns) -> Dimensions {
    Dimensions::new(c.w * voxel_size, c.h * voxel_size, c.d * voxel_size)
}

/// Table-style name: class letter plus 1-based ordinal within the class.
pub fn structure_name(class_index: usize, ordinal: usize) -> String {
    let letter = if class_index < 26 {
        ((b'A' + class_index as u8) as char).to_string()
    } else {
        format!("K{class_index}")
    };
    format!("{letter}{}", ordinal + 1)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GtComparison {
    pub gt_index: usize,
    pub w_um: Microns,
    pub h_um: Microns,
    pub d_um: Microns,
    pub abs_error_um: [Microns; 3],
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RoiRecord {
    pub roi_id: String,
    #[serde(rename = "class")]
    pub class_index: usize,
    pub class_name: String,
    pub cuboid: Cuboid3D,
    pub w_um: Microns,
    pub h_um: Microns,
    pub d_um: Microns,
    pub z_start: usize,
    pub z_end: usize,
    pub flags: CleanupFlags,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub ground_truth: Option<GtComparison>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetrologyReport {
    pub volume_id: String,
    pub voxel_size_um: Microns,
    pub records: Vec<RoiRecord>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub errors: Option<DimensionErrors>,
}

/// One record per measurement. With ground truth, each record is paired with
/// the overlapping gt box of the same class it matches greedily by 3D IoU,
/// and aggregate errors are computed over the paired records.
pub fn build_report(
    volume_id: &str,
    classes: &[String],
    measurements: &[RoiMeasurement],
    voxel_size: Microns,
    gt: Option<&[Cuboid3D]>,
) -> MetrologyReport {
    let mut ordinals = std::collections::HashMap::new();
    let mut records: Vec<RoiRecord> = measurements
        .iter()
        .map(|m| {
            let c = m.cuboid;
            let ord = ordinals.entry(c.class_index).or_insert(0usize);
            let roi_id = structure_name(c.class_index, *ord);
            *ord += 1;
            let dims = to_microns(&c, voxel_size);
            RoiRecord {
                roi_id,
                class_index: c.class_index,
                class_name: classes.get(c.class_index).cloned().unwrap_or_default(),
                cuboid: c,
                w_um: dims.w,
                h_um: dims.h,
                d_um: dims.d,
                z_start: c.z,
                z_end: c.z + c.d - 1,
                flags: m.flags.clone(),
                ground_truth: None,
            }
        })
        .collect();

    let errors = gt.map(|gt| {
        let mut measured = Vec::new();
        let mut truth = Vec::new();
        let mut class_list: Vec<usize> = records.iter().map(|r| r.class_index).collect();
        class_list.sort_unstable();
        class_list.dedup();
        for class in class_list {
            let rec_idx: Vec<usize> = (0..records.len()).filter(|&i| records[i].class_index == class).collect();
            let gt_idx: Vec<usize> = (0..gt.len()).filter(|&i| gt[i].class_index == class).collect();
            let preds: Vec<Cuboid3D> = rec_idx.iter().map(|&i| records[i].cuboid).collect();
            let gts: Vec<Cuboid3D> = gt_idx.iter().map(|&i| gt[i]).collect();
            // Any overlap qualifies; the best overlap wins.
            let m = metrics::match_detections_3d(&preds, &gts, f64::MIN_POSITIVE);
            for tp in m.true_positives {
                let (ri, gi) = (rec_idx[tp.pred], gt_idx[tp.gt]);
                let g = to_microns(&gt[gi], voxel_size);
                let r = &mut records[ri];
                r.ground_truth = Some(GtComparison {
                    gt_index: gi,
                    w_um: g.w,
                    h_um: g.h,
                    d_um: g.d,
                    abs_error_um: [r.w_um.abs_diff(g.w), r.h_um.abs_diff(g.h), r.d_um.abs_diff(g.d)],
                });
            }
        }
        for r in &records {
            if let Some(g) = &r.ground_truth {
                measured.push(Dimensions::new(r.w_um, r.h_um, r.d_um));
                truth.push(Dimensions::new(g.w_um, g.h_um, g.d_um));
            }
        }
        metrics::dimension_errors(&measured, &truth).expect("paired lists have equal length")
    });

    MetrologyReport {
        volume_id: volume_id.to_string(),
        voxel_size_um: voxel_size,
        records,
        errors,
    }
}

/// Aligned plain-text table: Structure, W, H, D and, when any record has
/// ground truth, GT W, GT H, GT D.
pub fn report_table(report: &MetrologyReport) -> String {
    let with_gt = report.records.iter().any(|r| r.ground_truth.is_some());
    let mut header = vec!["Structure", "W", "H", "D"];
    if with_gt {
        header.extend(["GT W", "GT H", "GT D"]);
    }
    let mut rows: Vec<Vec<String>> = vec![header.iter().map(|s| s.to_string()).collect()];
    for r in &report.records {
        let mut row = vec![r.roi_id.clone(), r.w_um.to_string(), r.h_um.to_string(), r.d_um.to_string()];
        if with_gt {
            match &r.ground_truth {
                Some(g) => row.extend([g.w_um.to_string(), g.h_um.to_string(), g.d_um.to_string()]),
                None => row.extend(["-".to_string(), "-".to_string(), "-".to_string()]),
            }
        }
        rows.push(row);
    }
    let widths: Vec<usize> = (0..header.len())
        .map(|c| rows.iter().map(|r| r[c].len()).max().unwrap_or(0))
        .collect();
    let mut out = String::new();
    for row in &rows {
        let line: Vec<String> = row
            .iter()
            .enumerate()
            .map(|(c, cell)| {
                if c == 0 {
                    format!("{cell:<w$}", w = widths[c])
                } else {
                    format!("{cell:>w$}", w = widths[c])
                }
            })
            .collect();
        let _ = writeln!(out, "{}", line.join("  ").trim_end());
    }
    if let Some(e) = &report.errors {
        let _ = writeln!(out);
        let _ = writeln!(out, "MAE  {:.4} um", e.mae_um);
        let _ = writeln!(out, "MSE  {:.4} um^2", e.mse_um2);
        let _ = writeln!(out, "RMSE {:.4} um", e.rmse_um);
    }
    out
}
