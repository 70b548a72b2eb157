//! Binary segmentation of ROIs.
//!
//! The reference segmenter thresholds each slice of one view and smooths it
//! with a 3×3 opening followed by a 3×3 closing. External per-voxel score
//! maps (one per orthogonal view) enter through [`import_scores`] and are
//! combined by [`fuse_views`]: the three scores are averaged and a voxel is
//! foreground when the mean is at least 0.5.

use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::geometry::{Axis, Cuboid3D, Dims};
use crate::io::{self, IoError};
use crate::micron::Microns;
use crate::morphology::{self, Mask2D};
use crate::threshold::{self, ThresholdMode};
use crate::volume::{DType, Volume, VoxelData};

#[derive(Debug, thiserror::Error)]
pub enum SegmentError {
    #[error(transparent)]
    Io(#[from] IoError),
    #[error("dimension mismatch: {0} vs {1}")]
    DimMismatch(Dims, Dims),
    #[error("view {0:?} supplied more than once")]
    DuplicateView(View),
    #[error("score {value} at voxel {index} is outside [0, 1]")]
    ScoreOutOfRange { index: usize, value: f32 },
    #[error("expected an f32le score volume, found {0}")]
    NotScoreVolume(DType),
    #[error("mask volume must be u8 with values 0 or 1 (voxel {0})")]
    NotBinaryMask(usize),
}

/// Orthogonal viewing direction of a 2D slice stack.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum View {
    /// Slices perpendicular to z.
    #[default]
    Axial,
    /// Slices perpendicular to x.
    Sagittal,
    /// Slices perpendicular to y.
    Coronal,
}

impl View {
    pub const ALL: [View; 3] = [View::Axial, View::Sagittal, View::Coronal];

    pub fn slicing_axis(self) -> Axis {
        match self {
            View::Axial => Axis::Z,
            View::Sagittal => Axis::X,
            View::Coronal => Axis::Y,
        }
    }
}

/// Binary voxel labelling positioned at `origin` inside a parent volume.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Mask3D {
    dims: Dims,
    bits: Vec<bool>,
    origin: [usize; 3],
}

impl Mask3D {
    pub fn new(dims: Dims) -> Mask3D {
        Mask3D {
            dims,
            bits: vec![false; dims.len()],
            origin: [0; 3],
        }
    }

    pub fn from_bits(dims: Dims, bits: Vec<bool>) -> Mask3D {
        assert_eq!(bits.len(), dims.len(), "mask payload length must equal nx*ny*nz");
        Mask3D {
            dims,
            bits,
            origin: [0; 3],
        }
    }

    pub fn with_origin(mut self, origin: [usize; 3]) -> Mask3D {
        self.origin = origin;
        self
    }

    pub fn dims(&self) -> Dims {
        self.dims
    }

    pub fn origin(&self) -> [usize; 3] {
        self.origin
    }

    pub fn bits(&self) -> &[bool] {
        &self.bits
    }

    /// The region of the parent volume this mask covers.
    pub fn frame(&self) -> Cuboid3D {
        Cuboid3D::new(0, self.origin, self.dims.as_array())
    }

    #[inline]
    pub fn get(&self, x: usize, y: usize, z: usize) -> bool {
        self.bits[self.dims.index(x, y, z)]
    }

    #[inline]
    pub fn set(&mut self, x: usize, y: usize, z: usize, value: bool) {
        let i = self.dims.index(x, y, z);
        self.bits[i] = value;
    }

    pub fn count(&self) -> usize {
        self.bits.iter().filter(|&&b| b).count()
    }

    pub fn is_empty(&self) -> bool {
        !self.bits.iter().any(|&b| b)
    }

    /// Tight box of the foreground in parent coordinates.
    pub fn bounding_box(&self, class_index: usize) -> Option<Cuboid3D> {
        let mut lo = [usize::MAX; 3];
        let mut hi = [0usize; 3];
        let mut any = false;
        for z in 0..self.dims.nz {
            for y in 0..self.dims.ny {
                let row = self.dims.index(0, y, z);
                for x in 0..self.dims.nx {
                    if self.bits[row + x] {
                        any = true;
                        let p = [x, y, z];
                        for i in 0..3 {
                            lo[i] = lo[i].min(p[i]);
                            hi[i] = hi[i].max(p[i]);
                        }
                    }
                }
            }
        }
        any.then(|| Cuboid3D::from_corners(class_index, lo, hi).translated(self.origin))
    }

    pub fn slice(&self, axis: Axis, index: usize) -> Mask2D {
        let d = self.dims;
        let (w, h) = d.slice_dims(axis);
        let mut m = Mask2D::new(w, h);
        for b in 0..h {
            for a in 0..w {
                let v = match axis {
                    Axis::Z => self.get(a, b, index),
                    Axis::Y => self.get(a, index, b),
                    Axis::X => self.get(index, a, b),
                };
                m.set(a, b, v);
            }
        }
        m
    }

    pub fn set_slice(&mut self, axis: Axis, index: usize, m: &Mask2D) {
        for b in 0..m.h {
            for a in 0..m.w {
                let (x, y, z) = match axis {
                    Axis::Z => (a, b, index),
                    Axis::Y => (a, index, b),
                    Axis::X => (index, a, b),
                };
                self.set(x, y, z, m.get(a, b));
            }
        }
    }

    /// Copies this mask into `frame` (parent coordinates); voxels outside
    /// this mask's own frame are background.
    pub fn reframe(&self, frame: &Cuboid3D) -> Mask3D {
        let dims = Dims::new(frame.w, frame.h, frame.d);
        let mut out = Mask3D::new(dims).with_origin(frame.start());
        let src = self.frame();
        let lo: Vec<usize> = (0..3).map(|i| src.start()[i].max(frame.start()[i])).collect();
        let hi: Vec<usize> = (0..3)
            .map(|i| {
                (src.start()[i] + src.extent()[i]).min(frame.start()[i] + frame.extent()[i])
            })
            .collect();
        if (0..3).any(|i| lo[i] >= hi[i]) {
            return out;
        }
        for z in lo[2]..hi[2] {
            for y in lo[1]..hi[1] {
                for x in lo[0]..hi[0] {
                    let v = self.get(x - self.origin[0], y - self.origin[1], z - self.origin[2]);
                    out.set(x - frame.x, y - frame.y, z - frame.z, v);
                }
            }
        }
        out
    }

    /// `{0,1}` u8 volume.
    pub fn to_volume(&self, voxel_size: Microns) -> Volume {
        Volume::new(
            self.dims,
            voxel_size,
            VoxelData::U8(self.bits.iter().map(|&b| b as u8).collect()),
        )
        .expect("mask dims are valid volume dims")
    }

    pub fn from_volume(v: &Volume) -> Result<Mask3D, SegmentError> {
        let VoxelData::U8(data) = v.data() else {
            return Err(SegmentError::NotBinaryMask(0));
        };
        let mut bits = Vec::with_capacity(data.len());
        for (i, &b) in data.iter().enumerate() {
            match b {
                0 => bits.push(false),
                1 => bits.push(true),
                _ => return Err(SegmentError::NotBinaryMask(i)),
            }
        }
        Ok(Mask3D::from_bits(v.dims(), bits))
    }
}

pub fn save_mask(m: &Mask3D, voxel_size: Microns, path: impl AsRef<Path>) -> Result<(), IoError> {
    io::save_volume(&m.to_volume(voxel_size), path)
}

pub fn load_mask(path: impl AsRef<Path>) -> Result<Mask3D, SegmentError> {
    Mask3D::from_volume(&io::load_volume(path)?)
}

/// Per-voxel foreground probabilities for one view.
#[derive(Debug, Clone, PartialEq)]
pub struct ScoreVolume {
    dims: Dims,
    scores: Vec<f32>,
    view: View,
}

impl ScoreVolume {
    pub fn new(dims: Dims, scores: Vec<f32>, view: View) -> Result<ScoreVolume, SegmentError> {
        if scores.len() != dims.len() {
            return Err(SegmentError::DimMismatch(dims, Dims::new(scores.len(), 1, 1)));
        }
        if let Some((index, &value)) = scores
            .iter()
            .enumerate()
            .find(|(_, s)| !(0.0..=1.0).contains(*s))
        {
            return Err(SegmentError::ScoreOutOfRange { index, value });
        }
        Ok(ScoreVolume { dims, scores, view })
    }

    /// Hard scores (0 or 1) from a binary mask.
    pub fn from_mask(m: &Mask3D, view: View) -> ScoreVolume {
        ScoreVolume {
            dims: m.dims(),
            scores: m.bits().iter().map(|&b| b as u8 as f32).collect(),
            view,
        }
    }

    pub fn dims(&self) -> Dims {
        self.dims
    }

    pub fn view(&self) -> View {
        self.view
    }

    pub fn scores(&self) -> &[f32] {
        &self.scores
    }

    pub fn to_volume(&self, voxel_size: Microns) -> Volume {
        Volume::new(self.dims, voxel_size, VoxelData::F32(self.scores.clone()))
            .expect("score dims are valid volume dims")
    }
}

/// Loads an `f32le` container as the score map of `view`.
pub fn import_scores(path: impl AsRef<Path>, view: View) -> Result<ScoreVolume, SegmentError> {
    let v = io::load_volume(path)?;
    let dims = v.dims();
    match v.into_data() {
        VoxelData::F32(scores) => ScoreVolume::new(dims, scores, view),
        other => Err(SegmentError::NotScoreVolume(other.dtype())),
    }
}

pub fn export_scores(
    s: &ScoreVolume,
    voxel_size: Microns,
    path: impl AsRef<Path>,
) -> Result<(), IoError> {
    io::save_volume(&s.to_volume(voxel_size), path)
}

/// Averages three orthogonal-view score maps and binarizes at 0.5
/// (a mean of exactly 0.5 is foreground).
pub fn fuse_views(
    a: &ScoreVolume,
    b: &ScoreVolume,
    c: &ScoreVolume,
) -> Result<Mask3D, SegmentError> {
    for other in [b, c] {
        if other.dims != a.dims {
            return Err(SegmentError::DimMismatch(a.dims, other.dims));
        }
    }
    if a.view == b.view || a.view == c.view {
        return Err(SegmentError::DuplicateView(a.view));
    }
    if b.view == c.view {
        return Err(SegmentError::DuplicateView(b.view));
    }
    let bits = a
        .scores
        .par_iter()
        .zip(b.scores.par_iter())
        .zip(c.scores.par_iter())
        .map(|((&p, &q), &r)| {
            // Sum in sorted order so the result cannot depend on argument order.
            let mut v = [p as f64, q as f64, r as f64];
            v.sort_by(f64::total_cmp);
            (v[0] + v[1] + v[2]) / 3.0 >= 0.5
        })
        .collect();
    Ok(Mask3D::from_bits(a.dims, bits))
}

/// Reference segmenter settings.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SegmenterConfig {
    pub threshold: ThresholdMode,
    pub view: View,
    /// Square structuring element half-size; 1 gives 3×3.
    pub radius: usize,
}

impl Default for SegmenterConfig {
    fn default() -> Self {
        SegmenterConfig {
            threshold: ThresholdMode::GlobalOtsu,
            view: View::Axial,
            radius: 1,
        }
    }
}

/// Thresholds every slice of `cfg.view`, then applies opening and closing.
pub fn segment_roi(roi: &Volume, cfg: &SegmenterConfig) -> Mask3D {
    let axis = cfg.view.slicing_axis();
    let global = match cfg.threshold {
        ThresholdMode::GlobalOtsu => Some(threshold::otsu(&roi.to_f32())),
        _ => None,
    };
    let slices: Vec<Mask2D> = (0..roi.dims().extent(axis))
        .into_par_iter()
        .map(|i| {
            let img = roi.slice(axis, i).expect("index within extent");
            let t = match global {
                Some(t) => t,
                None => threshold::resolve(cfg.threshold, &img.data),
            };
            let mut m = Mask2D::new(img.w, img.h);
            if let Some(t) = t {
                for (bit, &v) in m.bits.iter_mut().zip(&img.data) {
                    *bit = v as f64 > t;
                }
            }
            morphology::close(&morphology::open(&m, cfg.radius), cfg.radius)
        })
        .collect();
    let mut out = Mask3D::new(roi.dims());
    for (i, s) in slices.iter().enumerate() {
        out.set_slice(axis, i, s);
    }
    out
}

/// Runs the reference segmenter along all three views and fuses the
/// resulting hard score maps.
pub fn segment_roi_three_views(roi: &Volume, cfg: &SegmenterConfig) -> Mask3D {
    let scores: Vec<ScoreVolume> = View::ALL
        .iter()
        .map(|&view| {
            let m = segment_roi(roi, &SegmenterConfig { view, ..*cfg });
            ScoreVolume::from_mask(&m, view)
        })
        .collect();
    fuse_views(&scores[0], &scores[1], &scores[2]).expect("views are distinct and co-registered")
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn dims() -> Dims {
        Dims::new(3, 2, 2)
    }

    fn sv(values: &[f32], view: View) -> ScoreVolume {
        ScoreVolume::new(Dims::new(values.len(), 1, 1), values.to_vec(), view).unwrap()
    }

    #[test]
    fn majority_arithmetic() {
        let a = sv(&[1.0, 1.0, 0.5], View::Axial);
        let s = sv(&[1.0, 0.0, 0.5], View::Sagittal);
        let c = sv(&[0.0, 0.0, 0.5], View::Coronal);
        let m = fuse_views(&a, &s, &c).unwrap();
        assert_eq!(m.bits(), &[true, false, true]);
    }

    #[test]
    fn identical_inputs_binarize() {
        let values = [0.0, 0.49, 0.5, 0.51, 1.0, 0.2];
        let d = Dims::new(6, 1, 1);
        let m = fuse_views(
            &ScoreVolume::new(d, values.to_vec(), View::Axial).unwrap(),
            &ScoreVolume::new(d, values.to_vec(), View::Sagittal).unwrap(),
            &ScoreVolume::new(d, values.to_vec(), View::Coronal).unwrap(),
        )
        .unwrap();
        let expected: Vec<bool> = values.iter().map(|&v| v >= 0.5).collect();
        assert_eq!(m.bits(), expected.as_slice());
    }

    #[test]
    fn fuse_errors() {
        let a = sv(&[1.0], View::Axial);
        let s = sv(&[1.0], View::Sagittal);
        let big = sv(&[1.0, 0.0], View::Coronal);
        assert!(matches!(fuse_views(&a, &s, &big), Err(SegmentError::DimMismatch(..))));
        let dup = sv(&[1.0], View::Axial);
        assert!(matches!(fuse_views(&a, &s, &dup), Err(SegmentError::DuplicateView(View::Axial))));
    }

    #[test]
    fn score_range_is_checked() {
        assert!(matches!(
            ScoreVolume::new(Dims::new(2, 1, 1), vec![0.0, 1.5], View::Axial),
            Err(SegmentError::ScoreOutOfRange { index: 1, .. })
        ));
        assert!(ScoreVolume::new(Dims::new(1, 1, 1), vec![f32::NAN], View::Axial).is_err());
    }

    #[test]
    fn import_export_scores() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("s");
        let zeros = ScoreVolume::new(dims(), vec![0.0; 12], View::Coronal).unwrap();
        export_scores(&zeros, Microns::from_units(7000), &p).unwrap();
        assert_eq!(import_scores(&p, View::Coronal).unwrap(), zeros);

        let bad = Volume::new(dims(), Microns::from_units(7000), VoxelData::F32({
            let mut v = vec![0.25f32; 12];
            v[7] = 1.5;
            v
        }))
        .unwrap();
        io::save_volume(&bad, &p).unwrap();
        assert!(matches!(
            import_scores(&p, View::Axial),
            Err(SegmentError::ScoreOutOfRange { index: 7, .. })
        ));

        let u8v = Volume::filled(dims(), Microns::from_units(7000), DType::U8, 0.0).unwrap();
        io::save_volume(&u8v, &p).unwrap();
        assert!(matches!(import_scores(&p, View::Axial), Err(SegmentError::NotScoreVolume(DType::U8))));
    }

    #[test]
    fn background_roi_gives_empty_mask() {
        let v = Volume::filled(Dims::new(8, 8, 4), Microns::from_units(7000), DType::U8, 40.0).unwrap();
        assert!(segment_roi(&v, &SegmenterConfig::default()).is_empty());
        let cfg = SegmenterConfig { threshold: ThresholdMode::Otsu, ..Default::default() };
        assert!(segment_roi(&v, &cfg).is_empty());
    }

    #[test]
    fn reframe_and_bounding_box() {
        let mut m = Mask3D::new(Dims::new(3, 3, 3)).with_origin([10, 20, 30]);
        m.set(1, 1, 1, true);
        m.set(2, 1, 1, true);
        let bb = m.bounding_box(0).unwrap();
        assert_eq!(bb.start(), [11, 21, 31]);
        assert_eq!(bb.extent(), [2, 1, 1]);
        let r = m.reframe(&Cuboid3D::new(0, [12, 20, 30], [4, 4, 4]));
        assert_eq!(r.count(), 1);
        assert!(r.get(0, 1, 1));
        assert_eq!(r.reframe(&m.frame()).count(), 1);
    }

    #[test]
    fn mask_volume_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let mut m = Mask3D::new(dims());
        m.set(2, 1, 0, true);
        let p = dir.path().join("m");
        save_mask(&m, Microns::from_units(7000), &p).unwrap();
        assert_eq!(load_mask(&p).unwrap(), m);
        let v = Volume::filled(dims(), Microns::from_units(7000), DType::U8, 2.0).unwrap();
        assert!(matches!(Mask3D::from_volume(&v), Err(SegmentError::NotBinaryMask(0))));
    }

    proptest! {
        #[test]
        fn fusion_is_permutation_invariant(
            values in proptest::collection::vec((0f32..=1.0, 0f32..=1.0, 0f32..=1.0), 1..40)
        ) {
            let d = Dims::new(values.len(), 1, 1);
            let a: Vec<f32> = values.iter().map(|t| t.0).collect();
            let b: Vec<f32> = values.iter().map(|t| t.1).collect();
            let c: Vec<f32> = values.iter().map(|t| t.2).collect();
            let mk = |v: &Vec<f32>, view| ScoreVolume::new(d, v.clone(), view).unwrap();
            let reference = fuse_views(&mk(&a, View::Axial), &mk(&b, View::Sagittal), &mk(&c, View::Coronal)).unwrap();
            let perms = [(&b, &a, &c), (&c, &b, &a), (&a, &c, &b), (&b, &c, &a), (&c, &a, &b)];
            for (p, q, r) in perms {
                let m = fuse_views(&mk(p, View::Axial), &mk(q, View::Sagittal), &mk(r, View::Coronal)).unwrap();
                prop_assert_eq!(m.bits(), reference.bits());
            }
        }

        #[test]
        fn side_preserving_rescaling_keeps_mask(
            votes in proptest::collection::vec((any::<bool>(), any::<bool>(), any::<bool>()), 1..40),
            hi in 0.75f32..=1.0, lo in 0f32..0.25,
        ) {
            // Binary votes mapped to {lo, hi}: each voxel's mean stays on its
            // side of 0.5 whenever hi + 2*lo < 1.5 and 2*hi + lo >= 1.5.
            prop_assume!(hi + 2.0 * lo < 1.5 && 2.0 * hi + lo >= 1.5);
            let d = Dims::new(votes.len(), 1, 1);
            let build = |f: &dyn Fn(bool) -> f32, pick: usize| {
                votes.iter().map(|v| f([v.0, v.1, v.2][pick])).collect::<Vec<f32>>()
            };
            let hard = |b: bool| b as u8 as f32;
            let soft = |b: bool| if b { hi } else { lo };
            let fuse = |f: &dyn Fn(bool) -> f32| {
                fuse_views(
                    &ScoreVolume::new(d, build(f, 0), View::Axial).unwrap(),
                    &ScoreVolume::new(d, build(f, 1), View::Sagittal).unwrap(),
                    &ScoreVolume::new(d, build(f, 2), View::Coronal).unwrap(),
                ).unwrap()
            };
            prop_assert_eq!(fuse(&hard), fuse(&soft));
        }
    }
}
