//! Binary 2D masks and square-element morphology.
//!
//! Opening keeps exactly the union of all (2r+1)×(2r+1) squares that lie
//! inside both the image and the foreground. Closing behaves as if the image
//! were surrounded by an infinite background: a pixel is removed from the
//! closing iff some square, possibly reaching past the border, covers it
//! while touching no foreground pixel.

/// Binary image, x fastest.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Mask2D {
    pub w: usize,
    pub h: usize,
    pub bits: Vec<bool>,
}

impl Mask2D {
    pub fn new(w: usize, h: usize) -> Mask2D {
        Mask2D {
            w,
            h,
            bits: vec![false; w * h],
        }
    }

    pub fn from_bits(w: usize, h: usize, bits: Vec<bool>) -> Mask2D {
        assert_eq!(bits.len(), w * h, "mask payload length must equal w*h");
        Mask2D { w, h, bits }
    }

    /// Parses rows of `#` (foreground) and `.` (background).
    pub fn from_ascii(rows: &[&str]) -> Mask2D {
        let h = rows.len();
        let w = rows.first().map_or(0, |r| r.len());
        let mut m = Mask2D::new(w, h);
        for (y, row) in rows.iter().enumerate() {
            assert_eq!(row.len(), w, "ragged ascii mask");
            for (x, c) in row.bytes().enumerate() {
                m.set(x, y, c == b'#');
            }
        }
        m
    }

    #[inline]
    pub fn get(&self, x: usize, y: usize) -> bool {
        self.bits[x + self.w * y]
    }

    #[inline]
    pub fn set(&mut self, x: usize, y: usize, value: bool) {
        self.bits[x + self.w * y] = value;
    }

    pub fn count(&self) -> usize {
        self.bits.iter().filter(|&&b| b).count()
    }

    pub fn is_empty(&self) -> bool {
        !self.bits.iter().any(|&b| b)
    }

    pub fn complement(&self) -> Mask2D {
        Mask2D {
            w: self.w,
            h: self.h,
            bits: self.bits.iter().map(|&b| !b).collect(),
        }
    }

    /// Foreground pixels in raster order.
    pub fn pixels(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        self.bits
            .iter()
            .enumerate()
            .filter(|(_, &b)| b)
            .map(move |(i, _)| (i % self.w, i / self.w))
    }
}

/// Prefix counts of a line of booleans, `out[i]` = set bits before `i`.
fn prefix_counts(line: impl Iterator<Item = bool>, out: &mut Vec<u32>) {
    out.clear();
    out.push(0);
    let mut acc = 0;
    for b in line {
        acc += b as u32;
        out.push(acc);
    }
}

/// One separable pass along x (`horizontal`) or y.
fn pass(m: &Mask2D, radius: usize, horizontal: bool, erode: bool) -> Mask2D {
    let (len, lines) = if horizontal { (m.w, m.h) } else { (m.h, m.w) };
    let mut out = Mask2D::new(m.w, m.h);
    let mut prefix = Vec::with_capacity(len + 1);
    for line in 0..lines {
        let at = |i: usize| {
            if horizontal {
                i + m.w * line
            } else {
                line + m.w * i
            }
        };
        prefix_counts((0..len).map(|i| m.bits[at(i)]), &mut prefix);
        for i in 0..len {
            let value = if erode {
                // Window must be fully inside the line and fully set.
                i >= radius
                    && i + radius < len
                    && prefix[i + radius + 1] - prefix[i - radius] == (2 * radius + 1) as u32
            } else {
                let lo = i.saturating_sub(radius);
                let hi = (i + radius + 1).min(len);
                prefix[hi] > prefix[lo]
            };
            out.bits[at(i)] = value;
        }
    }
    out
}

/// Erosion by a (2r+1)² square; out-of-image pixels count as background.
pub fn erode(m: &Mask2D, radius: usize) -> Mask2D {
    if radius == 0 {
        return m.clone();
    }
    pass(&pass(m, radius, true, true), radius, false, true)
}

/// Dilation by a (2r+1)² square, clipped to the image.
pub fn dilate(m: &Mask2D, radius: usize) -> Mask2D {
    if radius == 0 {
        return m.clone();
    }
    pass(&pass(m, radius, true, false), radius, false, false)
}

pub fn open(m: &Mask2D, radius: usize) -> Mask2D {
    dilate(&erode(m, radius), radius)
}

/// Copy of `m` surrounded by `pad` pixels of `value`.
fn padded(m: &Mask2D, pad: usize, value: bool) -> Mask2D {
    let mut out = Mask2D::from_bits(m.w + 2 * pad, m.h + 2 * pad, vec![value; (m.w + 2 * pad) * (m.h + 2 * pad)]);
    for y in 0..m.h {
        for x in 0..m.w {
            out.set(x + pad, y + pad, m.get(x, y));
        }
    }
    out
}

fn cropped(m: &Mask2D, pad: usize, w: usize, h: usize) -> Mask2D {
    let mut out = Mask2D::new(w, h);
    for y in 0..h {
        for x in 0..w {
            out.set(x, y, m.get(x + pad, y + pad));
        }
    }
    out
}

pub fn close(m: &Mask2D, radius: usize) -> Mask2D {
    if radius == 0 {
        return m.clone();
    }
    // 2r of padding is enough for every square touching the image to be
    // evaluated exactly.
    let pad = 2 * radius;
    let opened = open(&padded(&m.complement(), pad, true), radius);
    cropped(&opened, pad, m.w, m.h).complement()
}
