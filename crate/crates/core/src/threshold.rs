//! Global thresholding.

use serde::{Deserialize, Serialize};

const BINS: usize = 256;

/// How a grey image is binarized. Foreground is `value > threshold`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ThresholdMode {
    Fixed(f64),
    /// Otsu on each 2D image independently.
    Otsu,
    /// One Otsu threshold over the whole volume, then applied to every slice.
    GlobalOtsu,
}

/// Otsu's threshold over `values`, or `None` when all values are equal.
///
/// Values are histogrammed into 256 equal bins over `[min, max]`; the split
/// maximising between-class variance is returned as the midpoint between the
/// largest value below it and the smallest value above it, so a two-level
/// input is always separated exactly.
pub fn otsu(values: &[f32]) -> Option<f64> {
    let (mut lo, mut hi) = (f32::INFINITY, f32::NEG_INFINITY);
    for &v in values {
        lo = lo.min(v);
        hi = hi.max(v);
    }
    if values.is_empty() || lo >= hi {
        return None;
    }
    let (lo, hi) = (lo as f64, hi as f64);
    let width = (hi - lo) / BINS as f64;
    let bin_of = |v: f64| (((v - lo) / width) as usize).min(BINS - 1);

    let mut count = [0u64; BINS];
    let mut sum = [0f64; BINS];
    let mut bin_min = [f64::INFINITY; BINS];
    let mut bin_max = [f64::NEG_INFINITY; BINS];
    for &v in values {
        let v = v as f64;
        let b = bin_of(v);
        count[b] += 1;
        sum[b] += v;
        bin_min[b] = bin_min[b].min(v);
        bin_max[b] = bin_max[b].max(v);
    }

    let total = values.len() as f64;
    let total_sum: f64 = sum.iter().sum();
    let mut w0 = 0f64;
    let mut s0 = 0f64;
    let mut best: Option<(usize, f64)> = None;
    for k in 0..BINS - 1 {
        w0 += count[k] as f64;
        s0 += sum[k];
        let w1 = total - w0;
        if w0 == 0.0 || w1 == 0.0 {
            continue;
        }
        let m0 = s0 / w0;
        let m1 = (total_sum - s0) / w1;
        let between = w0 * w1 * (m0 - m1) * (m0 - m1);
        if best.is_none_or(|(_, b)| between > b) {
            best = Some((k, between));
        }
    }
    let (k, _) = best?;
    let below = bin_max[..=k].iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let above = bin_min[k + 1..].iter().copied().fold(f64::INFINITY, f64::min);
    Some((below + above) / 2.0)
}

/// Resolves a mode to a concrete threshold for `values`; `None` means no
/// pixel is foreground (constant input under Otsu).
pub fn resolve(mode: ThresholdMode, values: &[f32]) -> Option<f64> {
    match mode {
        ThresholdMode::Fixed(t) => Some(t),
        ThresholdMode::Otsu | ThresholdMode::GlobalOtsu => otsu(values),
    }
}
