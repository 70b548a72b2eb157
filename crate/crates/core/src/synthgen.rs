//! Synthetic test-vehicle phantoms with exact voxel ground truth.
//!
//! Voxel (i, j, k) has its center at coordinates (i, j, k) and belongs to a
//! primitive iff that center lies inside the analytic solid. Extents along a
//! primitive's length are half-open, so a cylinder of depth 20 covers exactly
//! 20 slices.
//!
//! Solids:
//! - cylinder: axis along z, `|p - c|_xy <= radius`, `z0 <= k < z0 + depth`
//!   with `z0 = center_z - depth / 2`;
//! - capped pillar: the same shaft with `depth = shaft_depth`, topped by a
//!   hemisphere of equal radius centered on the shaft's upper face;
//! - box: `c - size / 2 <= p < c + size / 2` on every axis.

use std::path::{Path, PathBuf};

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::geometry::{Cuboid3D, Dims};
use crate::io::{self, GroundTruth, GtBox, IoError, MaskRef};
use crate::micron::Microns;
use crate::segment::{self, Mask3D};
use crate::volume::{DType, Volume, VoxelData};

#[derive(Debug, thiserror::Error)]
pub enum SynthError {
    #[error("primitive {0} extends outside the volume")]
    PrimitiveOutOfBounds(usize),
    #[error("primitives {0} and {1} share class and overlap")]
    OverlappingPrimitives(usize, usize),
    #[error("primitive {index}: {reason}")]
    InvalidPrimitive { index: usize, reason: String },
    #[error("invalid scene: {0}")]
    InvalidScene(String),
    #[error(transparent)]
    Io(#[from] IoError),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Shape {
    Cylinder { radius: f64, depth: f64 },
    CappedPillar { radius: f64, shaft_depth: f64 },
    Box { w: f64, h: f64, d: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PrimitiveSpec {
    #[serde(flatten)]
    pub shape: Shape,
    #[serde(rename = "class")]
    pub class_index: usize,
    pub center_x: f64,
    pub center_y: f64,
    pub center_z: f64,
    pub intensity: f64,
}

impl PrimitiveSpec {
    pub fn new(shape: Shape, class_index: usize, center: [f64; 3], intensity: f64) -> Self {
        PrimitiveSpec {
            shape,
            class_index,
            center_x: center[0],
            center_y: center[1],
            center_z: center[2],
            intensity,
        }
    }

    fn validate(&self) -> Result<(), String> {
        let finite = [self.center_x, self.center_y, self.center_z, self.intensity]
            .iter()
            .all(|v| v.is_finite());
        if !finite {
            return Err("non-finite center or intensity".into());
        }
        match self.shape {
            Shape::Cylinder { radius, depth } => {
                if !(radius > 0.0) {
                    return Err("radius must be > 0".into());
                }
                if !(depth >= 1.0) {
                    return Err("depth must be >= 1".into());
                }
            }
            Shape::CappedPillar {
                radius,
                shaft_depth,
            } => {
                if !(radius > 0.0) {
                    return Err("radius must be > 0".into());
                }
                if !(shaft_depth >= 1.0) {
                    return Err("shaft depth must be >= 1".into());
                }
            }
            Shape::Box { w, h, d } => {
                if !(w >= 1.0 && h >= 1.0 && d >= 1.0) {
                    return Err("box sides must be >= 1".into());
                }
            }
        }
        Ok(())
    }

    /// Center-point membership test.
    pub fn contains(&self, x: f64, y: f64, z: f64) -> bool {
        let (dx, dy) = (x - self.center_x, y - self.center_y);
        match self.shape {
            Shape::Cylinder { radius, depth } => {
                let z0 = self.center_z - depth / 2.0;
                dx * dx + dy * dy <= radius * radius && z >= z0 && z < z0 + depth
            }
            Shape::CappedPillar {
                radius,
                shaft_depth,
            } => {
                let z0 = self.center_z - shaft_depth / 2.0;
                let top = z0 + shaft_depth;
                let r2 = radius * radius;
                let radial = dx * dx + dy * dy;
                if z >= z0 && z < top {
                    radial <= r2
                } else if z >= top {
                    let dz = z - top;
                    radial + dz * dz <= r2
                } else {
                    false
                }
            }
            Shape::Box { w, h, d } => {
                let (x0, y0, z0) = (
                    self.center_x - w / 2.0,
                    self.center_y - h / 2.0,
                    self.center_z - d / 2.0,
                );
                x >= x0 && x < x0 + w && y >= y0 && y < y0 + h && z >= z0 && z < z0 + d
            }
        }
    }

    /// Closed analytic bounds (min, max) per axis; every member voxel center
    /// lies inside.
    pub fn analytic_bounds(&self) -> [(f64, f64); 3] {
        let c = [self.center_x, self.center_y, self.center_z];
        match self.shape {
            Shape::Cylinder { radius, depth } => [
                (c[0] - radius, c[0] + radius),
                (c[1] - radius, c[1] + radius),
                (c[2] - depth / 2.0, c[2] + depth / 2.0),
            ],
            Shape::CappedPillar {
                radius,
                shaft_depth,
            } => [
                (c[0] - radius, c[0] + radius),
                (c[1] - radius, c[1] + radius),
                (c[2] - shaft_depth / 2.0, c[2] + shaft_depth / 2.0 + radius),
            ],
            Shape::Box { w, h, d } => [
                (c[0] - w / 2.0, c[0] + w / 2.0),
                (c[1] - h / 2.0, c[1] + h / 2.0),
                (c[2] - d / 2.0, c[2] + d / 2.0),
            ],
        }
    }
}

/// Blur-then-noise degradation applied after rasterization.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NoiseSpec {
    /// Standard deviation as a fraction of the dtype's dynamic range.
    pub sigma: f64,
    /// Box filter half-width in voxels.
    pub blur_radius: usize,
}

fn default_volume_id() -> String {
    "phantom".into()
}

fn default_dtype() -> String {
    "u8".into()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SceneSpec {
    #[serde(default = "default_volume_id")]
    pub volume_id: String,
    pub dims: [usize; 3],
    pub voxel_size_um: Microns,
    #[serde(default = "default_dtype")]
    pub dtype: String,
    pub background: f64,
    /// Class names; defaults to `class0..classN` as needed by the primitives.
    #[serde(default)]
    pub classes: Vec<String>,
    pub primitives: Vec<PrimitiveSpec>,
    pub rng_seed: u64,
    #[serde(default)]
    pub noise: Option<NoiseSpec>,
}

impl SceneSpec {
    pub fn dims(&self) -> Dims {
        Dims::new(self.dims[0], self.dims[1], self.dims[2])
    }

    fn resolved_dtype(&self) -> Result<DType, SynthError> {
        match self.dtype.as_str() {
            "u8" => Ok(DType::U8),
            "u16" | "u16le" => Ok(DType::U16),
            other => Err(SynthError::InvalidScene(format!(
                "phantoms must be u8 or u16, got {other:?}"
            ))),
        }
    }

    fn class_names(&self) -> Vec<String> {
        let needed = self
            .primitives
            .iter()
            .map(|p| p.class_index + 1)
            .max()
            .unwrap_or(0);
        if self.classes.is_empty() {
            (0..needed).map(|i| format!("class{i}")).collect()
        } else {
            self.classes.clone()
        }
    }
}

/// A generated phantom with its exact ground truth.
#[derive(Debug, Clone)]
pub struct Scene {
    pub volume: Volume,
    pub ground_truth: GroundTruth,
    /// One mask per primitive, cropped to its tight box (origin set).
    pub primitive_masks: Vec<Mask3D>,
    /// One full-volume mask per class.
    pub class_masks: Vec<Mask3D>,
}

/// Rasterizes one primitive into a mask framed by its tight voxel box.
pub fn rasterize(p: &PrimitiveSpec, index: usize, dims: Dims) -> Result<Mask3D, SynthError> {
    let bounds = p.analytic_bounds();
    let upper = dims.as_array();
    let mut lo = [0i64; 3];
    let mut hi = [0i64; 3];
    for a in 0..3 {
        lo[a] = bounds[a].0.ceil() as i64;
        hi[a] = bounds[a].1.floor() as i64;
    }
    // Collect member voxels over the analytic range; any member outside the
    // grid means the solid does not fit.
    let mut members = Vec::new();
    for k in lo[2]..=hi[2] {
        for j in lo[1]..=hi[1] {
            for i in lo[0]..=hi[0] {
                if p.contains(i as f64, j as f64, k as f64) {
                    let inside = [i, j, k]
                        .iter()
                        .zip(upper)
                        .all(|(&c, n)| c >= 0 && (c as usize) < n);
                    if !inside {
                        return Err(SynthError::PrimitiveOutOfBounds(index));
                    }
                    members.push([i as usize, j as usize, k as usize]);
                }
            }
        }
    }
    if members.is_empty() {
        return Err(SynthError::InvalidPrimitive {
            index,
            reason: "solid covers no voxel center".into(),
        });
    }
    let mut min = [usize::MAX; 3];
    let mut max = [0; 3];
    for m in &members {
        for a in 0..3 {
            min[a] = min[a].min(m[a]);
            max[a] = max[a].max(m[a]);
        }
    }
    let frame = Cuboid3D::from_corners(p.class_index, min, max);
    let mut mask = Mask3D::new(Dims::new(frame.w, frame.h, frame.d)).with_origin(min);
    for m in members {
        mask.set(m[0] - min[0], m[1] - min[1], m[2] - min[2], true);
    }
    Ok(mask)
}

fn masks_overlap(a: &Mask3D, b: &Mask3D) -> bool {
    let (fa, fb) = (a.frame(), b.frame());
    let lo: Vec<usize> = (0..3).map(|i| fa.start()[i].max(fb.start()[i])).collect();
    let hi: Vec<usize> = (0..3).map(|i| fa.last()[i].min(fb.last()[i])).collect();
    if (0..3).any(|i| lo[i] > hi[i]) {
        return false;
    }
    for z in lo[2]..=hi[2] {
        for y in lo[1]..=hi[1] {
            for x in lo[0]..=hi[0] {
                let (oa, ob) = (a.origin(), b.origin());
                if a.get(x - oa[0], y - oa[1], z - oa[2]) && b.get(x - ob[0], y - ob[1], z - ob[2]) {
                    return true;
                }
            }
        }
    }
    false
}

/// Rasterizes `spec` into a volume plus ground truth; applies `spec.noise`
/// when present. Pure function of `spec`.
pub fn generate_scene(spec: &SceneSpec) -> Result<Scene, SynthError> {
    let dims = spec.dims();
    if dims.nx == 0 || dims.ny == 0 || dims.nz == 0 {
        return Err(SynthError::InvalidScene(format!("dimensions must be positive, got {dims}")));
    }
    if !spec.voxel_size_um.is_positive() {
        return Err(SynthError::InvalidScene("voxel_size_um must be positive".into()));
    }
    let dtype = spec.resolved_dtype()?;
    let classes = spec.class_names();
    for (index, p) in spec.primitives.iter().enumerate() {
        p.validate()
            .map_err(|reason| SynthError::InvalidPrimitive { index, reason })?;
        if p.intensity <= spec.background {
            return Err(SynthError::InvalidPrimitive {
                index,
                reason: "intensity must exceed the background".into(),
            });
        }
        if p.class_index >= classes.len() {
            return Err(SynthError::InvalidPrimitive {
                index,
                reason: format!("class {} not among {} classes", p.class_index, classes.len()),
            });
        }
    }

    let primitive_masks = spec
        .primitives
        .par_iter()
        .enumerate()
        .map(|(i, p)| rasterize(p, i, dims))
        .collect::<Result<Vec<_>, _>>()?;

    for i in 0..primitive_masks.len() {
        for j in i + 1..primitive_masks.len() {
            if spec.primitives[i].class_index == spec.primitives[j].class_index
                && masks_overlap(&primitive_masks[i], &primitive_masks[j])
            {
                return Err(SynthError::OverlappingPrimitives(i, j));
            }
        }
    }

    let mut values = vec![spec.background as f32; dims.len()];
    let mut class_masks = vec![Mask3D::new(dims); classes.len()];
    for (p, m) in spec.primitives.iter().zip(&primitive_masks) {
        let o = m.origin();
        let md = m.dims();
        let intensity = p.intensity as f32;
        for z in 0..md.nz {
            for y in 0..md.ny {
                for x in 0..md.nx {
                    if m.get(x, y, z) {
                        let (gx, gy, gz) = (x + o[0], y + o[1], z + o[2]);
                        let idx = dims.index(gx, gy, gz);
                        // Overlaps between classes resolve to the brightest.
                        values[idx] = values[idx].max(intensity);
                        class_masks[p.class_index].set(gx, gy, gz, true);
                    }
                }
            }
        }
    }
    let data = VoxelData::from_f32(dtype, values.into_iter().map(|v| dtype.quantize(v)));
    let mut volume = Volume::new(dims, spec.voxel_size_um, data)
        .map_err(|e| SynthError::InvalidScene(e.to_string()))?;
    if let Some(noise) = spec.noise {
        volume = add_noise(&volume, &noise, spec.rng_seed)?;
    }

    let boxes = spec
        .primitives
        .iter()
        .zip(&primitive_masks)
        .map(|(p, m)| {
            GtBox::from(&m.bounding_box(p.class_index).expect("rasterized primitives are nonempty"))
        })
        .collect();
    Ok(Scene {
        volume,
        ground_truth: GroundTruth {
            volume_id: spec.volume_id.clone(),
            classes,
            boxes,
            mask_refs: Vec::new(),
        },
        primitive_masks,
        class_masks,
    })
}

/// Separable normalized box filter; windows are clipped at the borders and
/// averaged over the voxels they actually cover.
pub fn box_blur(values: &[f32], dims: Dims, radius: usize) -> Vec<f32> {
    if radius == 0 {
        return values.to_vec();
    }
    let mut cur: Vec<f64> = values.iter().map(|&v| v as f64).collect();
    for axis in 0..3 {
        let n = dims.as_array()[axis];
        let stride = match axis {
            0 => 1,
            1 => dims.nx,
            _ => dims.nx * dims.ny,
        };
        let lines: Vec<usize> = (0..dims.len())
            .filter(|&i| (i / stride) % n == 0)
            .collect();
        let mut next = vec![0f64; cur.len()];
        let results: Vec<(usize, Vec<f64>)> = lines
            .par_iter()
            .map(|&start| {
                let mut prefix = Vec::with_capacity(n + 1);
                prefix.push(0.0);
                let mut acc = 0.0;
                for t in 0..n {
                    acc += cur[start + t * stride];
                    prefix.push(acc);
                }
                let out = (0..n)
                    .map(|t| {
                        let lo = t.saturating_sub(radius);
                        let hi = (t + radius + 1).min(n);
                        (prefix[hi] - prefix[lo]) / (hi - lo) as f64
                    })
                    .collect();
                (start, out)
            })
            .collect();
        for (start, out) in results {
            for (t, v) in out.into_iter().enumerate() {
                next[start + t * stride] = v;
            }
        }
        cur = next;
    }
    cur.into_iter().map(|v| v as f32).collect()
}

/// Box blur followed by additive Gaussian noise, clamped and rounded to the
/// volume's dtype. Each z-slice draws from its own ChaCha stream of `seed`,
/// so the result does not depend on thread count.
pub fn add_noise(v: &Volume, noise: &NoiseSpec, seed: u64) -> Result<Volume, SynthError> {
    if !(noise.sigma >= 0.0) || !noise.sigma.is_finite() {
        return Err(SynthError::InvalidScene(format!(
            "noise sigma must be a finite value >= 0, got {}",
            noise.sigma
        )));
    }
    let dims = v.dims();
    let dtype = v.dtype();
    let blurred = box_blur(&v.to_f32(), dims, noise.blur_radius);
    let sd = noise.sigma * dtype.max_value() as f64;
    let plane = dims.nx * dims.ny;
    let mut out = vec![0f32; dims.len()];
    out.par_chunks_mut(plane)
        .zip(blurred.par_chunks(plane))
        .enumerate()
        .for_each(|(z, (dst, src))| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            rng.set_stream(z as u64);
            let normal = (sd > 0.0).then(|| Normal::new(0.0, sd).expect("finite sd"));
            for (d, &s) in dst.iter_mut().zip(src) {
                let n = normal.as_ref().map_or(0.0, |n| n.sample(&mut rng));
                *d = dtype.quantize((s as f64 + n) as f32);
            }
        });
    Volume::new(dims, v.voxel_size(), VoxelData::from_f32(dtype, out))
        .map_err(|e| SynthError::InvalidScene(e.to_string()))
}

/// Paths written by [`write_scene`].
#[derive(Debug, Clone)]
pub struct ScenePaths {
    pub volume: PathBuf,
    pub ground_truth: PathBuf,
    pub masks: Vec<PathBuf>,
}

/// Writes `<prefix>` (volume container), `<prefix>.gt.json` and one
/// `<prefix>.mask<k>` container per class.
pub fn write_scene(scene: &Scene, prefix: &Path) -> Result<ScenePaths, SynthError> {
    let name = prefix
        .file_name()
        .and_then(|n| n.to_str())
        .ok_or_else(|| SynthError::InvalidScene(format!("bad output prefix {}", prefix.display())))?
        .to_string();
    let dir = prefix.parent().unwrap_or(Path::new(""));
    io::save_volume(&scene.volume, prefix)?;
    let mut gt = scene.ground_truth.clone();
    let mut masks = Vec::new();
    for (k, m) in scene.class_masks.iter().enumerate() {
        let file = format!("{name}.mask{k}");
        let path = dir.join(&file);
        segment::save_mask(m, scene.volume.voxel_size(), &path)?;
        gt.mask_refs.push(MaskRef {
            class_index: k,
            path: file,
        });
        masks.push(path);
    }
    let gt_path = dir.join(format!("{name}.gt.json"));
    io::save_ground_truth(&gt, &gt_path)?;
    Ok(ScenePaths {
        volume: prefix.to_path_buf(),
        ground_truth: gt_path,
        masks,
    })
}

/// Bump-array layout expressed in physical units.
#[derive(Debug, Clone, Copy)]
pub struct BumpGrid {
    pub rows: usize,
    pub cols: usize,
    pub bump_diameter_um: f64,
    pub pitch_um: f64,
    pub shaft_depth_um: f64,
    pub voxel_size_um: f64,
}

impl BumpGrid {
    pub fn radius_voxels(&self) -> f64 {
        self.bump_diameter_um / 2.0 / self.voxel_size_um
    }

    pub fn pitch_voxels(&self) -> f64 {
        self.pitch_um / self.voxel_size_um
    }

    /// Capped-pillar centers `(x, y)` laid out row-major from `(first, first)`.
    pub fn centers(&self, first: f64) -> Vec<(f64, f64)> {
        let p = self.pitch_voxels();
        (0..self.rows)
            .flat_map(|r| (0..self.cols).map(move |c| (first + c as f64 * p, first + r as f64 * p)))
            .collect()
    }

    pub fn primitives(&self, first: f64, center_z: f64, class_index: usize, intensity: f64) -> Vec<PrimitiveSpec> {
        let shape = Shape::CappedPillar {
            radius: self.radius_voxels(),
            shaft_depth: self.shaft_depth_um / self.voxel_size_um,
        };
        self.centers(first)
            .into_iter()
            .map(|(x, y)| PrimitiveSpec::new(shape, class_index, [x, y, center_z], intensity))
            .collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn base(primitives: Vec<PrimitiveSpec>) -> SceneSpec {
        SceneSpec {
            volume_id: "t".into(),
            dims: [32, 32, 32],
            voxel_size_um: Microns::from_units(7000),
            dtype: "u8".into(),
            background: 40.0,
            classes: vec![],
            primitives,
            rng_seed: 1,
            noise: None,
        }
    }

    #[test]
    fn empty_scene_is_background() {
        let s = generate_scene(&base(vec![])).unwrap();
        assert!(s.volume.to_f32().iter().all(|&v| v == 40.0));
        assert!(s.ground_truth.boxes.is_empty());
    }

    #[test]
    fn out_of_bounds_and_overlap() {
        let cyl = Shape::Cylinder { radius: 5.0, depth: 10.0 };
        let s = base(vec![PrimitiveSpec::new(cyl, 0, [2.0, 16.0, 16.0], 200.0)]);
        assert!(matches!(generate_scene(&s), Err(SynthError::PrimitiveOutOfBounds(0))));
        let s = base(vec![
            PrimitiveSpec::new(cyl, 0, [10.0, 16.0, 16.0], 200.0),
            PrimitiveSpec::new(cyl, 0, [18.0, 16.0, 16.0], 200.0),
        ]);
        assert!(matches!(generate_scene(&s), Err(SynthError::OverlappingPrimitives(0, 1))));
        // Different classes may overlap; the brighter wins.
        let s = base(vec![
            PrimitiveSpec::new(cyl, 0, [10.0, 16.0, 16.0], 200.0),
            PrimitiveSpec::new(cyl, 1, [18.0, 16.0, 16.0], 150.0),
        ]);
        let scene = generate_scene(&s).unwrap();
        assert_eq!(scene.volume.get(14, 16, 16), 200.0);
        assert_eq!(scene.volume.get(22, 16, 16), 150.0);
    }

    #[test]
    fn invalid_primitives() {
        let bad = [
            Shape::Cylinder { radius: 0.0, depth: 4.0 },
            Shape::Cylinder { radius: 2.0, depth: 0.5 },
            Shape::Box { w: 3.0, h: 0.0, d: 3.0 },
        ];
        for shape in bad {
            let s = base(vec![PrimitiveSpec::new(shape, 0, [16.0; 3], 200.0)]);
            assert!(matches!(generate_scene(&s), Err(SynthError::InvalidPrimitive { .. })));
        }
        let s = base(vec![PrimitiveSpec::new(
            Shape::Box { w: 3.0, h: 3.0, d: 3.0 },
            0,
            [16.0; 3],
            30.0,
        )]);
        assert!(matches!(generate_scene(&s), Err(SynthError::InvalidPrimitive { .. })));
    }

    #[test]
    fn box_extents_are_exact() {
        let s = base(vec![PrimitiveSpec::new(
            Shape::Box { w: 6.0, h: 4.0, d: 9.0 },
            0,
            [10.0, 11.5, 12.3],
            200.0,
        )]);
        let scene = generate_scene(&s).unwrap();
        let b = scene.ground_truth.boxes[0];
        assert_eq!((b.w, b.h, b.d), (6, 4, 9));
        assert_eq!((b.x, b.y), (7, 10));
    }

    #[test]
    fn deterministic_noise() {
        let v = Volume::filled(Dims::new(16, 16, 8), Microns::from_units(7000), DType::U8, 128.0).unwrap();
        let n = NoiseSpec { sigma: 0.1, blur_radius: 1 };
        assert_eq!(add_noise(&v, &n, 9).unwrap(), add_noise(&v, &n, 9).unwrap());
        assert_ne!(add_noise(&v, &n, 9).unwrap(), add_noise(&v, &n, 10).unwrap());
        let identity = NoiseSpec { sigma: 0.0, blur_radius: 0 };
        assert_eq!(add_noise(&v, &identity, 9).unwrap(), v);
        assert!(add_noise(&v, &NoiseSpec { sigma: -0.1, blur_radius: 0 }, 1).is_err());
    }

    #[test]
    fn blur_preserves_constants_and_mass_interior() {
        let dims = Dims::new(7, 5, 4);
        let flat = vec![3.0f32; dims.len()];
        assert!(box_blur(&flat, dims, 2).iter().all(|&v| (v - 3.0).abs() < 1e-6));
        let mut spike = vec![0f32; dims.len()];
        spike[dims.index(3, 2, 2)] = 27.0;
        let b = box_blur(&spike, dims, 1);
        assert!((b[dims.index(3, 2, 2)] - 1.0).abs() < 1e-6);
        assert!((b[dims.index(2, 1, 1)] - 1.0).abs() < 1e-6);
        assert_eq!(b[dims.index(5, 2, 2)], 0.0);
    }

    #[test]
    fn bump_grid_conversion() {
        let g = BumpGrid {
            rows: 2,
            cols: 2,
            bump_diameter_um: 20.0,
            pitch_um: 40.0,
            shaft_depth_um: 14.0,
            voxel_size_um: 0.7,
        };
        assert!((g.pitch_voxels() - 57.142857).abs() < 1e-5);
        assert!((g.radius_voxels() - 14.285714).abs() < 1e-5);
        let c = g.centers(20.0);
        assert_eq!(c.len(), 4);
        assert!((c[1].0 - c[0].0 - 57.142857).abs() < 1e-5);
    }

    #[test]
    fn spec_json_shape() {
        let json = r#"{
            "dims": [16, 16, 16], "voxel_size_um": 0.7, "background": 10,
            "primitives": [{"kind": "cylinder", "class": 0, "center_x": 8, "center_y": 8,
                            "center_z": 8, "radius": 3, "depth": 6, "intensity": 200}],
            "rng_seed": 3
        }"#;
        let spec: SceneSpec = serde_json::from_str(json).unwrap();
        assert_eq!(spec.primitives[0].shape, Shape::Cylinder { radius: 3.0, depth: 6.0 });
        let scene = generate_scene(&spec).unwrap();
        assert_eq!(scene.ground_truth.classes, vec!["class0".to_string()]);
        assert_eq!(scene.ground_truth.boxes[0].d, 6);
    }
}
