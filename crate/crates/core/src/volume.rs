//! In-memory voxel volumes and 2D slices.

use std::fmt;

use crate::geometry::{Axis, Cuboid3D, Dims};
use crate::micron::Microns;

/// Scalar kind of a volume payload.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum DType {
    U8,
    U16,
    /// Reserved for score maps with values in [0, 1].
    F32,
}

impl DType {
    pub fn bytes_per_scalar(self) -> usize {
        match self {
            DType::U8 => 1,
            DType::U16 => 2,
            DType::F32 => 4,
        }
    }

    /// Largest representable intensity; the dynamic range starts at zero.
    pub fn max_value(self) -> f32 {
        match self {
            DType::U8 => u8::MAX as f32,
            DType::U16 => u16::MAX as f32,
            DType::F32 => 1.0,
        }
    }

    /// Name used in `.meta` headers.
    pub fn header_name(self) -> &'static str {
        match self {
            DType::U8 => "u8",
            DType::U16 => "u16le",
            DType::F32 => "f32le",
        }
    }

    pub fn from_header_name(name: &str) -> Option<DType> {
        match name {
            "u8" => Some(DType::U8),
            "u16le" => Some(DType::U16),
            "f32le" => Some(DType::F32),
            _ => None,
        }
    }

    /// Rounds and clamps a float into this scalar kind's range.
    pub fn quantize(self, value: f32) -> f32 {
        match self {
            DType::U8 | DType::U16 => value.round().clamp(0.0, self.max_value()),
            DType::F32 => value.clamp(0.0, 1.0),
        }
    }
}

impl fmt::Display for DType {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.header_name())
    }
}

/// Voxel payload, x fastest, then y, then z.
#[derive(Debug, Clone, PartialEq)]
pub enum VoxelData {
    U8(Vec<u8>),
    U16(Vec<u16>),
    F32(Vec<f32>),
}

impl VoxelData {
    pub fn dtype(&self) -> DType {
        match self {
            VoxelData::U8(_) => DType::U8,
            VoxelData::U16(_) => DType::U16,
            VoxelData::F32(_) => DType::F32,
        }
    }

    pub fn len(&self) -> usize {
        match self {
            VoxelData::U8(d) => d.len(),
            VoxelData::U16(d) => d.len(),
            VoxelData::F32(d) => d.len(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    #[inline]
    pub fn get(&self, i: usize) -> f32 {
        match self {
            VoxelData::U8(d) => d[i] as f32,
            VoxelData::U16(d) => d[i] as f32,
            VoxelData::F32(d) => d[i],
        }
    }

    /// Builds a payload of `dtype` from floats, which must already be
    /// representable (see [`DType::quantize`]).
    pub fn from_f32(dtype: DType, values: impl IntoIterator<Item = f32>) -> VoxelData {
        let values = values.into_iter();
        match dtype {
            DType::U8 => VoxelData::U8(values.map(|v| v as u8).collect()),
            DType::U16 => VoxelData::U16(values.map(|v| v as u16).collect()),
            DType::F32 => VoxelData::F32(values.collect()),
        }
    }
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum VolumeError {
    #[error("payload holds {actual} scalars but {dims} needs {expected}")]
    LengthMismatch {
        dims: Dims,
        expected: usize,
        actual: usize,
    },
    #[error("volume dimensions must be positive, got {0}")]
    EmptyDims(Dims),
    #[error("voxel size must be positive, got {0} um")]
    NonPositiveVoxelSize(Microns),
    #[error("slice index {index} out of range for axis {axis} with extent {extent}")]
    IndexOutOfRange {
        axis: Axis,
        index: usize,
        extent: usize,
    },
    #[error("ROI {roi:?} does not fit inside volume {dims}")]
    RoiOutOfBounds { roi: Cuboid3D, dims: Dims },
    #[error("slices do not stack: {0}")]
    BadStack(String),
}

/// A reconstructed voxel grid with isotropic pitch.
#[derive(Debug, Clone, PartialEq)]
pub struct Volume {
    dims: Dims,
    voxel_size: Microns,
    data: VoxelData,
}

impl Volume {
    pub fn new(dims: Dims, voxel_size: Microns, data: VoxelData) -> Result<Volume, VolumeError> {
        if dims.nx == 0 || dims.ny == 0 || dims.nz == 0 {
            return Err(VolumeError::EmptyDims(dims));
        }
        if !voxel_size.is_positive() {
            return Err(VolumeError::NonPositiveVoxelSize(voxel_size));
        }
        if data.len() != dims.len() {
            return Err(VolumeError::LengthMismatch {
                dims,
                expected: dims.len(),
                actual: data.len(),
            });
        }
        Ok(Volume {
            dims,
            voxel_size,
            data,
        })
    }

    /// Volume with every voxel set to `value` (quantized to `dtype`).
    pub fn filled(
        dims: Dims,
        voxel_size: Microns,
        dtype: DType,
        value: f32,
    ) -> Result<Volume, VolumeError> {
        let v = dtype.quantize(value);
        Volume::new(
            dims,
            voxel_size,
            VoxelData::from_f32(dtype, std::iter::repeat_n(v, dims.len())),
        )
    }

    pub fn from_fn(
        dims: Dims,
        voxel_size: Microns,
        dtype: DType,
        mut f: impl FnMut(usize, usize, usize) -> f32,
    ) -> Result<Volume, VolumeError> {
        let mut values = Vec::with_capacity(dims.len());
        for z in 0..dims.nz {
            for y in 0..dims.ny {
                for x in 0..dims.nx {
                    values.push(dtype.quantize(f(x, y, z)));
                }
            }
        }
        Volume::new(dims, voxel_size, VoxelData::from_f32(dtype, values))
    }

    pub fn dims(&self) -> Dims {
        self.dims
    }

    pub fn voxel_size(&self) -> Microns {
        self.voxel_size
    }

    pub fn dtype(&self) -> DType {
        self.data.dtype()
    }

    pub fn data(&self) -> &VoxelData {
        &self.data
    }

    pub fn into_data(self) -> VoxelData {
        self.data
    }

    #[inline]
    pub fn get(&self, x: usize, y: usize, z: usize) -> f32 {
        self.data.get(self.dims.index(x, y, z))
    }

    /// Copies the payload out as floats (exact for every supported dtype).
    pub fn to_f32(&self) -> Vec<f32> {
        match &self.data {
            VoxelData::U8(d) => d.iter().map(|&v| v as f32).collect(),
            VoxelData::U16(d) => d.iter().map(|&v| v as f32).collect(),
            VoxelData::F32(d) => d.clone(),
        }
    }

    /// Extracts slice `index` along `axis`.
    ///
    /// Axis z gives an (nx, ny) image, x gives (ny, nz) and y gives (nx, nz);
    /// pixel (a, b) is the voxel at the corresponding in-plane coordinates.
    pub fn slice(&self, axis: Axis, index: usize) -> Result<Image2D, VolumeError> {
        let extent = self.dims.extent(axis);
        if index >= extent {
            return Err(VolumeError::IndexOutOfRange {
                axis,
                index,
                extent,
            });
        }
        let (w, h) = self.dims.slice_dims(axis);
        let mut data = Vec::with_capacity(w * h);
        let d = self.dims;
        match axis {
            Axis::Z => {
                let base = d.index(0, 0, index);
                let plane = base..base + w * h;
                match &self.data {
                    VoxelData::U8(v) => data.extend(v[plane].iter().map(|&s| s as f32)),
                    VoxelData::U16(v) => data.extend(v[plane].iter().map(|&s| s as f32)),
                    VoxelData::F32(v) => data.extend_from_slice(&v[plane]),
                }
            }
            Axis::Y => {
                for z in 0..d.nz {
                    for x in 0..d.nx {
                        data.push(self.get(x, index, z));
                    }
                }
            }
            Axis::X => {
                for z in 0..d.nz {
                    for y in 0..d.ny {
                        data.push(self.get(index, y, z));
                    }
                }
            }
        }
        Ok(Image2D {
            w,
            h,
            dtype: self.dtype(),
            data,
            provenance: Some((axis, index)),
        })
    }

    /// Re-stacks a complete, ordered set of slices taken along `axis`.
    pub fn from_slices(
        axis: Axis,
        slices: &[Image2D],
        voxel_size: Microns,
    ) -> Result<Volume, VolumeError> {
        let first = slices
            .first()
            .ok_or_else(|| VolumeError::BadStack("no slices".into()))?;
        let (w, h) = (first.w, first.h);
        let dtype = first.dtype;
        if slices.iter().any(|s| s.w != w || s.h != h || s.dtype != dtype) {
            return Err(VolumeError::BadStack("slice shapes or dtypes differ".into()));
        }
        let n = slices.len();
        let dims = match axis {
            Axis::Z => Dims::new(w, h, n),
            Axis::Y => Dims::new(w, n, h),
            Axis::X => Dims::new(n, w, h),
        };
        let mut values = vec![0f32; dims.len()];
        for (k, s) in slices.iter().enumerate() {
            for b in 0..h {
                for a in 0..w {
                    let idx = match axis {
                        Axis::Z => dims.index(a, b, k),
                        Axis::Y => dims.index(a, k, b),
                        Axis::X => dims.index(k, a, b),
                    };
                    values[idx] = s.get(a, b);
                }
            }
        }
        Volume::new(dims, voxel_size, VoxelData::from_f32(dtype, values))
    }

    /// Copies the sub-volume covered by `roi`; pitch is preserved.
    pub fn crop(&self, roi: &Cuboid3D) -> Result<Volume, VolumeError> {
        if !roi.fits_in(self.dims) {
            return Err(VolumeError::RoiOutOfBounds {
                roi: *roi,
                dims: self.dims,
            });
        }
        let out = Dims::new(roi.w, roi.h, roi.d);
        let rows = (0..roi.d).flat_map(|k| (0..roi.h).map(move |j| (j, k)));
        let data = match &self.data {
            VoxelData::U8(v) => VoxelData::U8(crop_rows(v, self.dims, roi, rows)),
            VoxelData::U16(v) => VoxelData::U16(crop_rows(v, self.dims, roi, rows)),
            VoxelData::F32(v) => VoxelData::F32(crop_rows(v, self.dims, roi, rows)),
        };
        Volume::new(out, self.voxel_size, data)
    }
}

fn crop_rows<T: Copy>(
    src: &[T],
    dims: Dims,
    roi: &Cuboid3D,
    rows: impl Iterator<Item = (usize, usize)>,
) -> Vec<T> {
    let mut out = Vec::with_capacity(roi.w * roi.h * roi.d);
    for (j, k) in rows {
        let start = dims.index(roi.x, roi.y + j, roi.z + k);
        out.extend_from_slice(&src[start..start + roi.w]);
    }
    out
}

/// A 2D grey image, x fastest.
#[derive(Debug, Clone, PartialEq)]
pub struct Image2D {
    pub w: usize,
    pub h: usize,
    /// Scalar kind of the volume this came from; fixes the dynamic range.
    pub dtype: DType,
    pub data: Vec<f32>,
    /// (axis, slice index) when produced by [`Volume::slice`].
    pub provenance: Option<(Axis, usize)>,
}

impl Image2D {
    pub fn new(w: usize, h: usize, dtype: DType, data: Vec<f32>) -> Image2D {
        assert_eq!(data.len(), w * h, "image payload length must equal w*h");
        Image2D {
            w,
            h,
            dtype,
            data,
            provenance: None,
        }
    }

    #[inline]
    pub fn get(&self, x: usize, y: usize) -> f32 {
        self.data[x + self.w * y]
    }

    pub fn dynamic_range(&self) -> f32 {
        self.dtype.max_value()
    }
}
