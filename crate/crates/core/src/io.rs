//! Volume containers and JSON exchange documents.
//!
//! A volume is stored as two files sharing a prefix: `<name>.meta`, UTF-8
//! `key=value` lines, and `<name>.raw`, the little-endian payload in x-fastest
//! order. Required keys are `nx`, `ny`, `nz`, `dtype` (`u8`, `u16le`, `f32le`)
//! and `voxel_size_um`; any other key is rejected.

use std::ffi::OsString;
use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::geometry::{Cuboid3D, Dims, ScoredBox2D};
use crate::micron::Microns;
use crate::volume::{DType, Volume, VolumeError, VoxelData};

#[derive(Debug, thiserror::Error)]
pub enum IoError {
    #[error("missing file {0}")]
    MissingFile(PathBuf),
    #[error("malformed header {path}: {reason}")]
    MalformedHeader { path: PathBuf, reason: String },
    #[error("truncated data {path}: expected {expected} bytes, found {actual}")]
    TruncatedData {
        path: PathBuf,
        expected: usize,
        actual: usize,
    },
    #[error("malformed document {path}: {reason}")]
    MalformedDocument { path: PathBuf, reason: String },
    #[error("box {index} refers to class {class} but only {classes} classes are declared")]
    UnknownClassIndex {
        index: usize,
        class: usize,
        classes: usize,
    },
    #[error("I/O failure on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl IoError {
    fn io(path: &Path, source: std::io::Error) -> IoError {
        if source.kind() == std::io::ErrorKind::NotFound {
            IoError::MissingFile(path.to_path_buf())
        } else {
            IoError::Io {
                path: path.to_path_buf(),
                source,
            }
        }
    }

    fn header(path: &Path, reason: impl Into<String>) -> IoError {
        IoError::MalformedHeader {
            path: path.to_path_buf(),
            reason: reason.into(),
        }
    }

    fn document(path: &Path, reason: impl Into<String>) -> IoError {
        IoError::MalformedDocument {
            path: path.to_path_buf(),
            reason: reason.into(),
        }
    }
}

/// Resolves `<name>`, `<name>.meta` or `<name>.raw` to the (meta, raw) pair.
pub fn container_paths(path: &Path) -> (PathBuf, PathBuf) {
    let prefix = match path.extension().and_then(|e| e.to_str()) {
        Some("meta") | Some("raw") => path.with_extension(""),
        _ => path.to_path_buf(),
    };
    let with_suffix = |suffix: &str| {
        let mut s: OsString = prefix.clone().into_os_string();
        s.push(suffix);
        PathBuf::from(s)
    };
    (with_suffix(".meta"), with_suffix(".raw"))
}

struct Header {
    dims: Dims,
    dtype: DType,
    voxel_size: Microns,
}

fn parse_header(path: &Path, text: &str) -> Result<Header, IoError> {
    let mut nx = None;
    let mut ny = None;
    let mut nz = None;
    let mut dtype = None;
    let mut voxel_size = None;
    for (lineno, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() {
            continue;
        }
        let (key, value) = line
            .split_once('=')
            .ok_or_else(|| IoError::header(path, format!("line {}: expected key=value", lineno + 1)))?;
        let (key, value) = (key.trim(), value.trim());
        let parse_count = |v: &str| {
            v.parse::<usize>()
                .map_err(|_| IoError::header(path, format!("{key}: non-numeric value {v:?}")))
        };
        let slot_taken = match key {
            "nx" => nx.replace(parse_count(value)?).is_some(),
            "ny" => ny.replace(parse_count(value)?).is_some(),
            "nz" => nz.replace(parse_count(value)?).is_some(),
            "dtype" => {
                let d = DType::from_header_name(value)
                    .ok_or_else(|| IoError::header(path, format!("unknown dtype {value:?}")))?;
                dtype.replace(d).is_some()
            }
            "voxel_size_um" => {
                let v: Microns = value.parse().map_err(|e| {
                    IoError::header(path, format!("voxel_size_um: {e}"))
                })?;
                voxel_size.replace(v).is_some()
            }
            other => return Err(IoError::header(path, format!("unknown key {other:?}"))),
        };
        if slot_taken {
            return Err(IoError::header(path, format!("duplicate key {key:?}")));
        }
    }
    let missing = |k: &str| IoError::header(path, format!("missing required key {k:?}"));
    let dims = Dims::new(
        nx.ok_or_else(|| missing("nx"))?,
        ny.ok_or_else(|| missing("ny"))?,
        nz.ok_or_else(|| missing("nz"))?,
    );
    if dims.nx == 0 || dims.ny == 0 || dims.nz == 0 {
        return Err(IoError::header(path, format!("dimensions must be positive, got {dims}")));
    }
    let voxel_size = voxel_size.ok_or_else(|| missing("voxel_size_um"))?;
    if !voxel_size.is_positive() {
        return Err(IoError::header(path, "voxel_size_um must be positive"));
    }
    Ok(Header {
        dims,
        dtype: dtype.ok_or_else(|| missing("dtype"))?,
        voxel_size,
    })
}

pub fn load_volume(path: impl AsRef<Path>) -> Result<Volume, IoError> {
    let (meta_path, raw_path) = container_paths(path.as_ref());
    let text = fs::read_to_string(&meta_path).map_err(|e| IoError::io(&meta_path, e))?;
    let header = parse_header(&meta_path, &text)?;
    let bytes = fs::read(&raw_path).map_err(|e| IoError::io(&raw_path, e))?;
    let expected = header
        .dims
        .len()
        .checked_mul(header.dtype.bytes_per_scalar())
        .ok_or_else(|| IoError::header(&meta_path, "dimensions overflow"))?;
    if bytes.len() != expected {
        return Err(IoError::TruncatedData {
            path: raw_path,
            expected,
            actual: bytes.len(),
        });
    }
    let data = match header.dtype {
        DType::U8 => VoxelData::U8(bytes),
        DType::U16 => VoxelData::U16(
            bytes
                .chunks_exact(2)
                .map(|c| u16::from_le_bytes([c[0], c[1]]))
                .collect(),
        ),
        DType::F32 => VoxelData::F32(
            bytes
                .chunks_exact(4)
                .map(|c| f32::from_le_bytes([c[0], c[1], c[2], c[3]]))
                .collect(),
        ),
    };
    Volume::new(header.dims, header.voxel_size, data).map_err(|e: VolumeError| {
        IoError::header(&meta_path, e.to_string())
    })
}

/// Header text exactly as written by [`save_volume`].
pub fn header_text(v: &Volume) -> String {
    let d = v.dims();
    format!(
        "nx={}\nny={}\nnz={}\ndtype={}\nvoxel_size_um={}\n",
        d.nx,
        d.ny,
        d.nz,
        v.dtype().header_name(),
        v.voxel_size()
    )
}

/// Little-endian payload bytes.
pub fn payload_bytes(v: &Volume) -> Vec<u8> {
    match v.data() {
        VoxelData::U8(d) => d.clone(),
        VoxelData::U16(d) => d.iter().flat_map(|s| s.to_le_bytes()).collect(),
        VoxelData::F32(d) => d.iter().flat_map(|s| s.to_le_bytes()).collect(),
    }
}

pub fn save_volume(v: &Volume, path: impl AsRef<Path>) -> Result<(), IoError> {
    let (meta_path, raw_path) = container_paths(path.as_ref());
    fs::write(&meta_path, header_text(v)).map_err(|e| IoError::io(&meta_path, e))?;
    fs::write(&raw_path, payload_bytes(v)).map_err(|e| IoError::io(&raw_path, e))?;
    Ok(())
}

/// Reference mask for one class, stored as a `{0,1}` u8 container.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MaskRef {
    #[serde(rename = "class")]
    pub class_index: usize,
    /// Container path, relative to the ground-truth document's directory
    /// unless absolute.
    pub path: String,
}

/// Annotated cuboids and reference masks for one volume.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GroundTruth {
    pub volume_id: String,
    pub classes: Vec<String>,
    pub boxes: Vec<GtBox>,
    pub mask_refs: Vec<MaskRef>,
}

/// Ground-truth box record; carries no score.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GtBox {
    #[serde(rename = "class")]
    pub class_index: usize,
    pub x: usize,
    pub y: usize,
    pub z: usize,
    pub w: usize,
    pub h: usize,
    pub d: usize,
}

impl From<&Cuboid3D> for GtBox {
    fn from(c: &Cuboid3D) -> Self {
        GtBox {
            class_index: c.class_index,
            x: c.x,
            y: c.y,
            z: c.z,
            w: c.w,
            h: c.h,
            d: c.d,
        }
    }
}

impl From<&GtBox> for Cuboid3D {
    fn from(b: &GtBox) -> Self {
        Cuboid3D::new(b.class_index, [b.x, b.y, b.z], [b.w, b.h, b.d])
    }
}

impl GroundTruth {
    pub fn cuboids(&self) -> Vec<Cuboid3D> {
        self.boxes.iter().map(Cuboid3D::from).collect()
    }

    pub fn class_name(&self, class_index: usize) -> &str {
        self.classes
            .get(class_index)
            .map(String::as_str)
            .unwrap_or("?")
    }

    /// Checks class indices of boxes and mask references.
    pub fn validate(&self) -> Result<(), IoError> {
        let classes = self.classes.len();
        let indices = self
            .boxes
            .iter()
            .map(|b| b.class_index)
            .chain(self.mask_refs.iter().map(|m| m.class_index));
        for (index, class) in indices.enumerate() {
            if class >= classes {
                return Err(IoError::UnknownClassIndex {
                    index,
                    class,
                    classes,
                });
            }
        }
        Ok(())
    }

    /// Index of the first box that is degenerate or leaves `dims`.
    pub fn first_box_outside(&self, dims: Dims) -> Option<usize> {
        self.boxes
            .iter()
            .position(|b| !Cuboid3D::from(b).fits_in(dims))
    }

    /// Resolves a mask reference against the directory of the document at
    /// `gt_path`.
    pub fn mask_path(gt_path: &Path, mask: &MaskRef) -> PathBuf {
        let p = Path::new(&mask.path);
        if p.is_absolute() {
            p.to_path_buf()
        } else {
            gt_path.parent().unwrap_or(Path::new("")).join(p)
        }
    }
}

fn read_json<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<T, IoError> {
    let text = fs::read_to_string(path).map_err(|e| IoError::io(path, e))?;
    serde_json::from_str(&text).map_err(|e| IoError::document(path, e.to_string()))
}

fn write_json<T: Serialize>(value: &T, path: &Path) -> Result<(), IoError> {
    let mut text = serde_json::to_string_pretty(value).expect("documents always serialize");
    text.push('\n');
    fs::write(path, text).map_err(|e| IoError::io(path, e))
}

pub fn load_ground_truth(path: impl AsRef<Path>) -> Result<GroundTruth, IoError> {
    let path = path.as_ref();
    let gt: GroundTruth = read_json(path)?;
    gt.validate()?;
    for (i, b) in gt.boxes.iter().enumerate() {
        if b.w == 0 || b.h == 0 || b.d == 0 {
            return Err(IoError::document(path, format!("box {i} has a zero extent")));
        }
    }
    Ok(gt)
}

pub fn save_ground_truth(gt: &GroundTruth, path: impl AsRef<Path>) -> Result<(), IoError> {
    write_json(gt, path.as_ref())
}

/// Per-slice 2D detections for one volume.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Detections2D {
    pub volume_id: String,
    pub classes: Vec<String>,
    pub boxes: Vec<ScoredBox2D>,
}

/// Fused 3D detections: the ground-truth schema with a `score` per box.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Detections3D {
    pub volume_id: String,
    pub classes: Vec<String>,
    pub boxes: Vec<Cuboid3D>,
    #[serde(default)]
    pub mask_refs: Vec<MaskRef>,
}

pub fn load_detections_2d(path: impl AsRef<Path>) -> Result<Detections2D, IoError> {
    read_json(path.as_ref())
}

pub fn save_detections_2d(d: &Detections2D, path: impl AsRef<Path>) -> Result<(), IoError> {
    write_json(d, path.as_ref())
}

pub fn load_detections_3d(path: impl AsRef<Path>) -> Result<Detections3D, IoError> {
    let path = path.as_ref();
    let doc: Detections3D = read_json(path)?;
    for (i, c) in doc.boxes.iter().enumerate() {
        if !c.is_valid() {
            return Err(IoError::document(
                path,
                format!("box {i} has a zero extent or a score outside [0, 1]"),
            ));
        }
    }
    Ok(doc)
}

pub fn save_detections_3d(d: &Detections3D, path: impl AsRef<Path>) -> Result<(), IoError> {
    write_json(d, path.as_ref())
}

/// Generic JSON document helpers for stage outputs defined elsewhere.
pub fn load_json<T: for<'de> Deserialize<'de>>(path: impl AsRef<Path>) -> Result<T, IoError> {
    read_json(path.as_ref())
}

pub fn save_json<T: Serialize>(value: &T, path: impl AsRef<Path>) -> Result<(), IoError> {
    write_json(value, path.as_ref())
}
