//! Voxel-level analysis of 3D X-ray microscopy volumes: slice-and-fuse
//! detection, ROI segmentation, metrology and evaluation, plus a phantom
//! generator with exact ground truth.

pub mod components;
pub mod detect;
pub mod fuse;
pub mod geometry;
pub mod io;
pub mod metrics;
pub mod metrology;
pub mod micron;
pub mod morphology;
pub mod pipeline;
pub mod segment;
pub mod synthgen;
pub mod threshold;
pub mod volume;

pub use geometry::{Axis, Cuboid3D, Dims, Rect2D, ScoredBox2D};
pub use micron::Microns;
pub use segment::Mask3D;
pub use volume::{DType, Image2D, Volume};
