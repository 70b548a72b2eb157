//! Slice-and-fuse: link per-slice boxes into tracks and emit 3D cuboids.

use serde::{Deserialize, Serialize};

use crate::geometry::{Axis, Cuboid3D, Rect2D, ScoredBox2D};
use crate::metrics;
use crate::volume::Volume;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum FuseError {
    #[error("boxes come from different slicing axes ({0} and {1})")]
    MixedAxes(Axis, Axis),
    #[error("cuboid {index} does not fit inside the volume")]
    RoiOutOfBounds { index: usize },
    #[error("invalid fuser config: {0}")]
    InvalidConfig(&'static str),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct FuserConfig {
    pub link_iou: f64,
    /// Slices a track may skip and still be extended.
    pub gap_tolerance: usize,
    pub min_depth: usize,
}

impl Default for FuserConfig {
    fn default() -> Self {
        FuserConfig {
            link_iou: 0.3,
            gap_tolerance: 1,
            min_depth: 2,
        }
    }
}

impl FuserConfig {
    pub fn validate(&self) -> Result<(), FuseError> {
        if !(self.link_iou > 0.0 && self.link_iou <= 1.0) {
            return Err(FuseError::InvalidConfig("link_iou must be in (0, 1]"));
        }
        if self.min_depth == 0 {
            return Err(FuseError::InvalidConfig("min_depth must be at least 1"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone)]
struct Track {
    class_index: usize,
    first: usize,
    last: usize,
    last_rect: Rect2D,
    footprint: Rect2D,
    score_sum: f64,
    members: usize,
}

impl Track {
    fn start(b: &ScoredBox2D) -> Track {
        Track {
            class_index: b.class_index,
            first: b.slice_index,
            last: b.slice_index,
            last_rect: b.rect(),
            footprint: b.rect(),
            score_sum: b.score,
            members: 1,
        }
    }

    fn push(&mut self, b: &ScoredBox2D) {
        self.last = b.slice_index;
        self.last_rect = b.rect();
        self.footprint = self.footprint.union(&b.rect());
        self.score_sum += b.score;
        self.members += 1;
    }

    fn score(&self) -> f64 {
        self.score_sum / self.members as f64
    }

    fn into_cuboid(self, axis: Axis) -> Cuboid3D {
        let (u, v) = axis.in_plane();
        let mut start = [0; 3];
        let mut extent = [0; 3];
        start[u.index()] = self.footprint.x;
        extent[u.index()] = self.footprint.w;
        start[v.index()] = self.footprint.y;
        extent[v.index()] = self.footprint.h;
        start[axis.index()] = self.first;
        extent[axis.index()] = self.last - self.first + 1;
        Cuboid3D::new(self.class_index, start, extent).with_score(self.score())
    }
}

/// Greedy IoU linking in ascending slice order.
///
/// Within a slice, boxes are visited by descending score, then (x_min,
/// y_min). Each box extends the open same-class track whose last box has the
/// highest 2D IoU ≥ `link_iou`; ties prefer the higher mean track score, then
/// the earlier start slice. A track extended on this slice cannot take a
/// second box from it. Tracks idle for more than `gap_tolerance` slices
/// close. Cuboids are returned by descending score, then by (z, y, x).
pub fn fuse_tracks(boxes: &[ScoredBox2D], cfg: &FuserConfig) -> Result<Vec<Cuboid3D>, FuseError> {
    cfg.validate()?;
    let Some(axis) = boxes.first().map(|b| b.axis) else {
        return Ok(Vec::new());
    };
    if let Some(b) = boxes.iter().find(|b| b.axis != axis) {
        return Err(FuseError::MixedAxes(axis, b.axis));
    }

    let mut order: Vec<&ScoredBox2D> = boxes.iter().collect();
    order.sort_by(|a, b| {
        a.slice_index
            .cmp(&b.slice_index)
            .then(b.score.total_cmp(&a.score))
            .then(a.x_min.cmp(&b.x_min))
            .then(a.y_min.cmp(&b.y_min))
    });

    let mut open: Vec<Track> = Vec::new();
    let mut closed: Vec<Track> = Vec::new();
    let mut i = 0;
    while i < order.len() {
        let slice = order[i].slice_index;
        let mut j = i;
        while j < order.len() && order[j].slice_index == slice {
            j += 1;
        }

        // Close tracks whose gap would exceed the tolerance.
        let (still_open, expired): (Vec<Track>, Vec<Track>) = open
            .into_iter()
            .partition(|t| slice - t.last - 1 <= cfg.gap_tolerance);
        open = still_open;
        closed.extend(expired);

        let mut taken = vec![false; open.len()];
        let mut fresh = Vec::new();
        for b in &order[i..j] {
            let rect = b.rect();
            let mut best: Option<(usize, f64)> = None;
            for (t, track) in open.iter().enumerate() {
                if taken[t] || track.class_index != b.class_index {
                    continue;
                }
                let iou = metrics::iou_rect(&track.last_rect, &rect).value();
                if iou < cfg.link_iou {
                    continue;
                }
                let better = match best {
                    None => true,
                    Some((bt, biou)) => {
                        let other = &open[bt];
                        iou > biou
                            || (iou == biou
                                && (track.score() > other.score()
                                    || (track.score() == other.score() && track.first < other.first)))
                    }
                };
                if better {
                    best = Some((t, iou));
                }
            }
            match best {
                Some((t, _)) => {
                    taken[t] = true;
                    open[t].push(b);
                }
                None => fresh.push(Track::start(b)),
            }
        }
        open.extend(fresh);
        i = j;
    }
    closed.extend(open);

    let mut cuboids: Vec<Cuboid3D> = closed
        .into_iter()
        .filter(|t| t.last - t.first + 1 >= cfg.min_depth)
        .map(|t| t.into_cuboid(axis))
        .collect();
    sort_cuboids(&mut cuboids);
    Ok(cuboids)
}

pub fn sort_cuboids(cuboids: &mut [Cuboid3D]) {
    cuboids.sort_by(|a, b| {
        b.score
            .total_cmp(&a.score)
            .then(a.z.cmp(&b.z))
            .then(a.y.cmp(&b.y))
            .then(a.x.cmp(&b.x))
            .then(a.class_index.cmp(&b.class_index))
    });
}

/// Checks that every cuboid fits inside `v`.
pub fn bind_volume(cuboids: &[Cuboid3D], v: &Volume) -> Result<Vec<Cuboid3D>, FuseError> {
    for (index, c) in cuboids.iter().enumerate() {
        if !c.fits_in(v.dims()) {
            return Err(FuseError::RoiOutOfBounds { index });
        }
    }
    Ok(cuboids.to_vec())
}
