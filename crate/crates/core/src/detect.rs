//! Reference per-slice detector: optional in-plane box smoothing, global
//! threshold, connected components, one tight box per component.

use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::components::{self, Connectivity};
use crate::geometry::{Axis, Dims, ScoredBox2D};
use crate::io::{self, Detections2D, IoError};
use crate::morphology::Mask2D;
use crate::synthgen;
use crate::threshold::{self, ThresholdMode};
use crate::volume::{Image2D, Volume, VolumeError};

#[derive(Debug, thiserror::Error)]
pub enum DetectError {
    #[error(transparent)]
    Io(#[from] IoError),
    #[error("box {index}: {reason}")]
    InvalidBox { index: usize, reason: &'static str },
    #[error("min_area must be at least 1")]
    ZeroMinArea,
    #[error(transparent)]
    Volume(#[from] VolumeError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ScoreMode {
    #[default]
    Contrast,
    ConstantOne,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct DetectorConfig {
    pub threshold: ThresholdMode,
    pub connectivity: Connectivity,
    pub min_area: usize,
    pub score_mode: ScoreMode,
    pub class_index: usize,
    /// Half-width of the normalized box filter applied to each slice before
    /// thresholding; 0 disables it. Scores always use raw intensities.
    pub smoothing_radius: usize,
}

impl Default for DetectorConfig {
    fn default() -> Self {
        DetectorConfig {
            threshold: ThresholdMode::GlobalOtsu,
            connectivity: Connectivity::Eight,
            min_area: 1,
            score_mode: ScoreMode::Contrast,
            class_index: 0,
            smoothing_radius: 1,
        }
    }
}

impl DetectorConfig {
    pub fn validate(&self) -> Result<(), DetectError> {
        if self.min_area == 0 {
            return Err(DetectError::ZeroMinArea);
        }
        Ok(())
    }
}

fn smoothed(img: &Image2D, radius: usize) -> Vec<f32> {
    synthgen::box_blur(&img.data, Dims::new(img.w, img.h, 1), radius)
}

fn binarize(w: usize, h: usize, values: &[f32], t: Option<f64>) -> Mask2D {
    let mut m = Mask2D::new(w, h);
    if let Some(t) = t {
        for (bit, &v) in m.bits.iter_mut().zip(values) {
            *bit = v as f64 > t;
        }
    }
    m
}

fn sort_boxes(boxes: &mut [ScoredBox2D]) {
    boxes.sort_by(|a, b| {
        b.score
            .total_cmp(&a.score)
            .then(a.x_min.cmp(&b.x_min))
            .then(a.y_min.cmp(&b.y_min))
    });
}

/// Boxes of the components of `mask` with area ≥ `min_area`, scored against
/// `img`. `img` and `mask` share dimensions.
fn boxes_from_mask(img: &Image2D, mask: &Mask2D, cfg: &DetectorConfig) -> Vec<ScoredBox2D> {
    let labeling = components::label(mask, cfg.connectivity);
    if labeling.components.is_empty() {
        return Vec::new();
    }
    let (axis, slice_index) = img.provenance.unwrap_or((Axis::Z, 0));

    let n = labeling.components.len();
    let mut sums = vec![0f64; n + 1];
    for (&l, &v) in labeling.labels.iter().zip(&img.data) {
        sums[l as usize] += v as f64;
    }
    let fg_pixels: usize = labeling.components.iter().map(|c| c.area).sum();
    let bg_pixels = img.data.len() - fg_pixels;
    let bg_mean = if bg_pixels > 0 {
        sums[0] / bg_pixels as f64
    } else {
        0.0
    };
    let range = img.dtype.max_value() as f64;

    let mut boxes: Vec<ScoredBox2D> = labeling
        .components
        .iter()
        .enumerate()
        .filter(|(_, c)| c.area >= cfg.min_area)
        .map(|(i, c)| {
            let score = match cfg.score_mode {
                ScoreMode::ConstantOne => 1.0,
                ScoreMode::Contrast => {
                    let mean = sums[i + 1] / c.area as f64;
                    ((mean - bg_mean) / range).clamp(0.0, 1.0)
                }
            };
            ScoredBox2D {
                class_index: cfg.class_index,
                x_min: c.x_min,
                y_min: c.y_min,
                x_max: c.x_max,
                y_max: c.y_max,
                score,
                axis,
                slice_index,
            }
        })
        .collect();
    sort_boxes(&mut boxes);
    boxes
}

/// Detects bright components on one image. A `GlobalOtsu` config behaves as
/// per-image Otsu here, since a lone image has no wider context.
pub fn detect_slice(img: &Image2D, cfg: &DetectorConfig) -> Vec<ScoredBox2D> {
    let values = smoothed(img, cfg.smoothing_radius);
    let t = threshold::resolve(cfg.threshold, &values);
    boxes_from_mask(img, &binarize(img.w, img.h, &values, t), cfg)
}

/// Runs the detector on every slice along `axis`; boxes come out grouped by
/// ascending slice index. A `GlobalOtsu` threshold is computed once over all
/// smoothed slices.
pub fn detect_volume(v: &Volume, axis: Axis, cfg: &DetectorConfig) -> Result<Vec<ScoredBox2D>, DetectError> {
    cfg.validate()?;
    let slices = (0..v.dims().extent(axis))
        .into_par_iter()
        .map(|i| {
            let img = v.slice(axis, i)?;
            let values = smoothed(&img, cfg.smoothing_radius);
            Ok((img, values))
        })
        .collect::<Result<Vec<_>, DetectError>>()?;
    let global = match cfg.threshold {
        ThresholdMode::GlobalOtsu => {
            let all: Vec<f32> = slices.iter().flat_map(|(_, s)| s.iter().copied()).collect();
            Some(threshold::otsu(&all))
        }
        _ => None,
    };
    let per_slice: Vec<Vec<ScoredBox2D>> = slices
        .par_iter()
        .map(|(img, values)| {
            let t = match global {
                Some(t) => t,
                None => threshold::resolve(cfg.threshold, values),
            };
            boxes_from_mask(img, &binarize(img.w, img.h, values, t), cfg)
        })
        .collect();
    Ok(per_slice.into_iter().flatten().collect())
}

/// Loads externally produced 2D detections and checks every box.
pub fn import_detections(path: impl AsRef<Path>) -> Result<Detections2D, DetectError> {
    let dets = io::load_detections_2d(path)?;
    validate_boxes(&dets.boxes)?;
    Ok(dets)
}

pub fn validate_boxes(boxes: &[ScoredBox2D]) -> Result<(), DetectError> {
    for (index, b) in boxes.iter().enumerate() {
        if let Some(reason) = b.invariant_violation() {
            return Err(DetectError::InvalidBox { index, reason });
        }
    }
    Ok(())
}

pub fn export_detections(d: &Detections2D, path: impl AsRef<Path>) -> Result<(), DetectError> {
    io::save_detections_2d(d, path)?;
    Ok(())
}

/// Oracle boxes: the tight bounds of `mask`'s foreground on each slice along
/// `axis`, score 1. Used to feed the fuser with exact per-slice boxes.
pub fn oracle_boxes(
    mask: &crate::segment::Mask3D,
    axis: Axis,
    class_index: usize,
) -> Vec<ScoredBox2D> {
    let origin = mask.origin();
    let (u, v) = axis.in_plane();
    (0..mask.dims().extent(axis))
        .filter_map(|i| {
            let s = mask.slice(axis, i);
            let mut it = s.pixels();
            let first = it.next()?;
            let (mut x0, mut y0, mut x1, mut y1) = (first.0, first.1, first.0, first.1);
            for (x, y) in it {
                x0 = x0.min(x);
                x1 = x1.max(x);
                y0 = y0.min(y);
                y1 = y1.max(y);
            }
            Some(ScoredBox2D {
                class_index,
                x_min: x0 + origin[u.index()],
                y_min: y0 + origin[v.index()],
                x_max: x1 + origin[u.index()],
                y_max: y1 + origin[v.index()],
                score: 1.0,
                axis,
                slice_index: i + origin[axis.index()],
            })
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::volume::DType;

    fn image(w: usize, h: usize, squares: &[(usize, usize, usize)]) -> Image2D {
        let mut data = vec![20.0; w * h];
        for &(x0, y0, s) in squares {
            for y in y0..y0 + s {
                for x in x0..x0 + s {
                    data[x + w * y] = 220.0;
                }
            }
        }
        Image2D::new(w, h, DType::U8, data)
    }

    fn fixed() -> DetectorConfig {
        DetectorConfig {
            threshold: ThresholdMode::Fixed(100.0),
            smoothing_radius: 0,
            ..Default::default()
        }
    }

    #[test]
    fn blank_image_has_no_boxes() {
        assert!(detect_slice(&image(16, 16, &[]), &fixed()).is_empty());
        let otsu = DetectorConfig {
            threshold: ThresholdMode::Otsu,
            ..Default::default()
        };
        assert!(detect_slice(&image(16, 16, &[]), &otsu).is_empty());
    }

    #[test]
    fn single_square() {
        let b = detect_slice(&image(32, 32, &[(5, 5, 10)]), &fixed());
        assert_eq!(b.len(), 1);
        assert_eq!((b[0].x_min, b[0].y_min, b[0].x_max, b[0].y_max), (5, 5, 14, 14));
        assert!((b[0].score - 200.0 / 255.0).abs() < 1e-12);
    }

    #[test]
    fn two_squares_and_min_area() {
        let img = image(40, 40, &[(2, 2, 6), (20, 20, 2)]);
        assert_eq!(detect_slice(&img, &fixed()).len(), 2);
        let cfg = DetectorConfig {
            min_area: 5,
            ..fixed()
        };
        assert_eq!(detect_slice(&img, &cfg).len(), 1);
        let cfg = DetectorConfig {
            min_area: 0,
            ..fixed()
        };
        assert!(matches!(cfg.validate(), Err(DetectError::ZeroMinArea)));
    }

    #[test]
    fn ordering_ties_by_coordinates() {
        let img = image(40, 40, &[(20, 2, 4), (2, 20, 4), (2, 2, 4)]);
        let cfg = DetectorConfig {
            score_mode: ScoreMode::ConstantOne,
            ..fixed()
        };
        let b = detect_slice(&img, &cfg);
        let corners: Vec<_> = b.iter().map(|b| (b.x_min, b.y_min)).collect();
        assert_eq!(corners, vec![(2, 2), (2, 20), (20, 2)]);
    }

    #[test]
    fn invalid_box_reported_with_index() {
        let good = ScoredBox2D {
            class_index: 0,
            x_min: 1,
            y_min: 1,
            x_max: 2,
            y_max: 2,
            score: 0.5,
            axis: Axis::Z,
            slice_index: 0,
        };
        let bad = ScoredBox2D { x_min: 5, ..good };
        match validate_boxes(&[good, bad]) {
            Err(DetectError::InvalidBox { index, .. }) => assert_eq!(index, 1),
            other => panic!("{other:?}"),
        }
    }
}
