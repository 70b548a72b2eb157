//! Segmentation manifest: one mask container per ROI, framed in volume
//! coordinates.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use xrm3d::{Cuboid3D, Mask3D, Microns};

use crate::error::CliError;

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SegmentedRoi {
    /// Fused cuboid the ROI came from.
    pub detection: Cuboid3D,
    /// Region the mask covers.
    pub frame: Cuboid3D,
    /// Mask container, relative to the manifest's directory unless absolute.
    pub mask: String,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SegmentationManifest {
    pub volume_id: String,
    pub classes: Vec<String>,
    pub voxel_size_um: Microns,
    pub dims: [usize; 3],
    pub rois: Vec<SegmentedRoi>,
}

impl SegmentationManifest {
    pub fn mask_path(manifest_path: &Path, roi: &SegmentedRoi) -> PathBuf {
        let p = Path::new(&roi.mask);
        if p.is_absolute() {
            p.to_path_buf()
        } else {
            manifest_path.parent().unwrap_or(Path::new("")).join(p)
        }
    }

    /// Loads the mask of `roi` with its origin at the frame start.
    pub fn load_mask(&self, manifest_path: &Path, roi: &SegmentedRoi) -> Result<Mask3D, CliError> {
        let m = xrm3d::segment::load_mask(Self::mask_path(manifest_path, roi))?;
        let f = roi.frame;
        if m.dims().as_array() != f.extent() {
            return Err(CliError::malformed(format!(
                "mask {} is {} but its frame is {}x{}x{}",
                roi.mask,
                m.dims(),
                f.w,
                f.h,
                f.d
            )));
        }
        Ok(m.with_origin(f.start()))
    }
}
