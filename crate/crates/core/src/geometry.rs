//! Axis-aligned boxes shared by every pipeline stage.
//!
//! All extents are inclusive voxel/pixel counts: a cuboid with `x = 3, w = 2`
//! covers voxels 3 and 4.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

/// Slicing axis of a volume.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Axis {
    X,
    Y,
    Z,
}

impl Axis {
    pub const ALL: [Axis; 3] = [Axis::X, Axis::Y, Axis::Z];

    pub fn index(self) -> usize {
        match self {
            Axis::X => 0,
            Axis::Y => 1,
            Axis::Z => 2,
        }
    }

    /// The two in-plane volume axes of a slice taken along `self`, as
    /// (image column axis, image row axis).
    pub fn in_plane(self) -> (Axis, Axis) {
        match self {
            Axis::X => (Axis::Y, Axis::Z),
            Axis::Y => (Axis::X, Axis::Z),
            Axis::Z => (Axis::X, Axis::Y),
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Axis::X => "x",
            Axis::Y => "y",
            Axis::Z => "z",
        }
    }
}

impl fmt::Display for Axis {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Axis {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "x" | "X" => Ok(Axis::X),
            "y" | "Y" => Ok(Axis::Y),
            "z" | "Z" => Ok(Axis::Z),
            other => Err(format!("unknown axis {other:?}, expected x, y or z")),
        }
    }
}

/// Voxel counts along x, y and z.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Dims {
    pub nx: usize,
    pub ny: usize,
    pub nz: usize,
}

impl Dims {
    pub const fn new(nx: usize, ny: usize, nz: usize) -> Self {
        Dims { nx, ny, nz }
    }

    pub fn len(&self) -> usize {
        self.nx * self.ny * self.nz
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn extent(&self, axis: Axis) -> usize {
        match axis {
            Axis::X => self.nx,
            Axis::Y => self.ny,
            Axis::Z => self.nz,
        }
    }

    pub fn as_array(&self) -> [usize; 3] {
        [self.nx, self.ny, self.nz]
    }

    /// Linear index with x fastest, then y, then z.
    #[inline]
    pub fn index(&self, x: usize, y: usize, z: usize) -> usize {
        x + self.nx * (y + self.ny * z)
    }

    /// Dimensions of a slice along `axis` as (width, height).
    pub fn slice_dims(&self, axis: Axis) -> (usize, usize) {
        let (u, v) = axis.in_plane();
        (self.extent(u), self.extent(v))
    }
}

impl fmt::Display for Dims {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}x{}x{}", self.nx, self.ny, self.nz)
    }
}

/// Axis-aligned 3D box `[x, y, z, w, h, d]` with a class and confidence.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Cuboid3D {
    #[serde(rename = "class")]
    pub class_index: usize,
    pub x: usize,
    pub y: usize,
    pub z: usize,
    pub w: usize,
    pub h: usize,
    pub d: usize,
    #[serde(default = "unit_score")]
    pub score: f64,
}

fn unit_score() -> f64 {
    1.0
}

impl Cuboid3D {
    pub fn new(class_index: usize, start: [usize; 3], extent: [usize; 3]) -> Self {
        Cuboid3D {
            class_index,
            x: start[0],
            y: start[1],
            z: start[2],
            w: extent[0],
            h: extent[1],
            d: extent[2],
            score: 1.0,
        }
    }

    pub fn with_score(mut self, score: f64) -> Self {
        self.score = score;
        self
    }

    /// Smallest cuboid holding every voxel in `min..=max`.
    pub fn from_corners(class_index: usize, min: [usize; 3], max: [usize; 3]) -> Self {
        Cuboid3D::new(
            class_index,
            min,
            [max[0] - min[0] + 1, max[1] - min[1] + 1, max[2] - min[2] + 1],
        )
    }

    pub fn start(&self) -> [usize; 3] {
        [self.x, self.y, self.z]
    }

    pub fn extent(&self) -> [usize; 3] {
        [self.w, self.h, self.d]
    }

    /// Inclusive upper corner.
    pub fn last(&self) -> [usize; 3] {
        [self.x + self.w - 1, self.y + self.h - 1, self.z + self.d - 1]
    }

    pub fn volume(&self) -> u64 {
        self.w as u64 * self.h as u64 * self.d as u64
    }

    pub fn is_valid(&self) -> bool {
        self.w >= 1 && self.h >= 1 && self.d >= 1 && (0.0..=1.0).contains(&self.score)
    }

    pub fn fits_in(&self, dims: Dims) -> bool {
        self.w >= 1
            && self.h >= 1
            && self.d >= 1
            && self.x + self.w <= dims.nx
            && self.y + self.h <= dims.ny
            && self.z + self.d <= dims.nz
    }

    pub fn contains(&self, p: [usize; 3]) -> bool {
        let s = self.start();
        let e = self.extent();
        (0..3).all(|i| p[i] >= s[i] && p[i] < s[i] + e[i])
    }

    /// Same geometry, position shifted by `offset`.
    pub fn translated(&self, offset: [usize; 3]) -> Self {
        Cuboid3D {
            x: self.x + offset[0],
            y: self.y + offset[1],
            z: self.z + offset[2],
            ..*self
        }
    }

    /// Grows the box by `margin` voxels per side, clipped to `dims`.
    pub fn expanded(&self, margin: usize, dims: Dims) -> Self {
        let start = self.start();
        let last = self.last();
        let upper = dims.as_array();
        let mut lo = [0; 3];
        let mut hi = [0; 3];
        for i in 0..3 {
            lo[i] = start[i].saturating_sub(margin);
            hi[i] = (last[i] + margin).min(upper[i] - 1);
        }
        Cuboid3D {
            score: self.score,
            ..Cuboid3D::from_corners(self.class_index, lo, hi)
        }
    }

    pub fn geometry_eq(&self, other: &Cuboid3D) -> bool {
        self.start() == other.start() && self.extent() == other.extent()
    }
}

/// Per-slice 2D detection with inclusive pixel bounds.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScoredBox2D {
    #[serde(rename = "class")]
    pub class_index: usize,
    pub x_min: usize,
    pub y_min: usize,
    pub x_max: usize,
    pub y_max: usize,
    pub score: f64,
    pub axis: Axis,
    #[serde(rename = "slice")]
    pub slice_index: usize,
}

impl ScoredBox2D {
    pub fn width(&self) -> usize {
        self.x_max - self.x_min + 1
    }

    pub fn height(&self) -> usize {
        self.y_max - self.y_min + 1
    }

    pub fn area(&self) -> u64 {
        self.width() as u64 * self.height() as u64
    }

    /// Returns the first violated invariant, if any.
    pub fn invariant_violation(&self) -> Option<&'static str> {
        if self.x_min > self.x_max {
            Some("x_min > x_max")
        } else if self.y_min > self.y_max {
            Some("y_min > y_max")
        } else if !(0.0..=1.0).contains(&self.score) {
            Some("score outside [0, 1]")
        } else {
            None
        }
    }

    pub fn rect(&self) -> Rect2D {
        Rect2D {
            x: self.x_min,
            y: self.y_min,
            w: self.width(),
            h: self.height(),
        }
    }
}

/// Axis-aligned rectangle `[x, y, w, h]`, inclusive extents.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Rect2D {
    pub x: usize,
    pub y: usize,
    pub w: usize,
    pub h: usize,
}

impl Rect2D {
    pub fn x_max(&self) -> usize {
        self.x + self.w - 1
    }

    pub fn y_max(&self) -> usize {
        self.y + self.h - 1
    }

    pub fn union(&self, other: &Rect2D) -> Rect2D {
        let x = self.x.min(other.x);
        let y = self.y.min(other.y);
        let x_max = self.x_max().max(other.x_max());
        let y_max = self.y_max().max(other.y_max());
        Rect2D {
            x,
            y,
            w: x_max - x + 1,
            h: y_max - y + 1,
        }
    }

    pub fn contains_rect(&self, other: &Rect2D) -> bool {
        other.x >= self.x
            && other.y >= self.y
            && other.x_max() <= self.x_max()
            && other.y_max() <= self.y_max()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn cuboid_bounds() {
        let c = Cuboid3D::new(0, [1, 2, 3], [2, 2, 1]);
        assert_eq!(c.last(), [2, 3, 3]);
        assert!(c.fits_in(Dims::new(3, 4, 4)));
        assert!(!c.fits_in(Dims::new(3, 4, 3)));
        assert!(c.contains([2, 3, 3]));
        assert!(!c.contains([3, 3, 3]));
    }

    #[test]
    fn expanded_clips_to_volume() {
        let c = Cuboid3D::new(0, [1, 5, 0], [3, 2, 4]);
        let e = c.expanded(2, Dims::new(5, 8, 10));
        assert_eq!(e.start(), [0, 3, 0]);
        assert_eq!(e.last(), [4, 7, 5]);
    }

    #[test]
    fn axis_parsing() {
        assert_eq!("z".parse::<Axis>().unwrap(), Axis::Z);
        assert!("w".parse::<Axis>().is_err());
        assert_eq!(serde_json::to_string(&Axis::Y).unwrap(), "\"y\"");
    }

    #[test]
    fn rect_union() {
        let a = Rect2D { x: 2, y: 1, w: 3, h: 2 };
        let b = Rect2D { x: 4, y: 0, w: 6, h: 6 };
        let u = a.union(&b);
        assert_eq!(u, Rect2D { x: 2, y: 0, w: 8, h: 6 });
        assert!(u.contains_rect(&a) && u.contains_rect(&b));
    }
}
