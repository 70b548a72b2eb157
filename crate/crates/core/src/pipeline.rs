//! End-to-end run: detect → fuse → segment each ROI → measure.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::detect::{self, DetectError, DetectorConfig};
use crate::fuse::{self, FuseError, FuserConfig};
use crate::geometry::{Axis, Cuboid3D, ScoredBox2D};
use crate::metrology::{self, MetrologyConfig, RoiMeasurement};
use crate::segment::{self, Mask3D, SegmenterConfig};
use crate::volume::Volume;

#[derive(Debug, thiserror::Error)]
pub enum PipelineError {
    #[error(transparent)]
    Detect(#[from] DetectError),
    #[error(transparent)]
    Fuse(#[from] FuseError),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PipelineConfig {
    pub detector: DetectorConfig,
    pub fuser: FuserConfig,
    pub segmenter: SegmenterConfig,
    pub metrology: MetrologyConfig,
    pub axis: Axis,
    /// Voxels added around each fused cuboid before segmentation, so that
    /// morphology never sees the object touching the ROI border.
    pub roi_margin: usize,
    /// Segment along all three views and fuse instead of one view.
    pub three_views: bool,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        PipelineConfig {
            detector: DetectorConfig::default(),
            fuser: FuserConfig::default(),
            segmenter: SegmenterConfig::default(),
            metrology: MetrologyConfig::default(),
            axis: Axis::Z,
            roi_margin: 3,
            three_views: false,
        }
    }
}

#[derive(Debug, Clone)]
pub struct RoiResult {
    pub detection: Cuboid3D,
    /// Cropped region actually segmented.
    pub frame: Cuboid3D,
    /// Segmentation of `frame`, origin set to the frame start.
    pub mask: Mask3D,
    /// `None` when nothing survived cleanup.
    pub measurement: Option<RoiMeasurement>,
}

#[derive(Debug, Clone)]
pub struct PipelineOutput {
    pub boxes: Vec<ScoredBox2D>,
    pub cuboids: Vec<Cuboid3D>,
    pub rois: Vec<RoiResult>,
}

impl PipelineOutput {
    pub fn measurements(&self) -> Vec<RoiMeasurement> {
        self.rois.iter().filter_map(|r| r.measurement.clone()).collect()
    }
}

/// Segments and measures one ROI.
pub fn process_roi(v: &Volume, detection: &Cuboid3D, cfg: &PipelineConfig) -> RoiResult {
    let frame = detection.expanded(cfg.roi_margin, v.dims());
    let roi = v.crop(&frame).expect("frame clipped to the volume");
    let mask = if cfg.three_views {
        segment::segment_roi_three_views(&roi, &cfg.segmenter)
    } else {
        segment::segment_roi(&roi, &cfg.segmenter)
    }
    .with_origin(frame.start());
    let measurement = metrology::measure_roi(&mask, &cfg.metrology).ok().map(|mut m| {
        m.cuboid.class_index = detection.class_index;
        m.cuboid.score = detection.score;
        m
    });
    RoiResult {
        detection: *detection,
        frame,
        mask,
        measurement,
    }
}

pub fn run_pipeline(v: &Volume, cfg: &PipelineConfig) -> Result<PipelineOutput, PipelineError> {
    let boxes = detect::detect_volume(v, cfg.axis, &cfg.detector)?;
    let cuboids = fuse::bind_volume(&fuse::fuse_tracks(&boxes, &cfg.fuser)?, v)?;
    let rois = cuboids.par_iter().map(|c| process_roi(v, c, cfg)).collect();
    Ok(PipelineOutput { boxes, cuboids, rois })
}
