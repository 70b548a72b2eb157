//! Connected-component labelling of binary 2D masks.

use serde::{Deserialize, Serialize};

use crate::morphology::Mask2D;

/// Pixel adjacency used when grouping foreground pixels.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
#[serde(try_from = "u8", into = "u8")]
pub enum Connectivity {
    /// N, S, E and W neighbours.
    Four,
    /// All eight neighbours.
    #[default]
    Eight,
}

impl TryFrom<u8> for Connectivity {
    type Error = String;
    fn try_from(v: u8) -> Result<Self, Self::Error> {
        match v {
            4 => Ok(Connectivity::Four),
            8 => Ok(Connectivity::Eight),
            other => Err(format!("connectivity must be 4 or 8, got {other}")),
        }
    }
}

impl From<Connectivity> for u8 {
    fn from(c: Connectivity) -> u8 {
        match c {
            Connectivity::Four => 4,
            Connectivity::Eight => 8,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Component {
    pub area: usize,
    pub x_min: usize,
    pub y_min: usize,
    pub x_max: usize,
    pub y_max: usize,
    /// First pixel of the component in raster order, i.e. smallest (y, x).
    pub anchor: (usize, usize),
}

/// Label image plus per-component statistics.
///
/// Labels start at 1 and are assigned in raster order of each component's
/// anchor; 0 is background. `components[l - 1]` describes label `l`.
#[derive(Debug, Clone)]
pub struct Labeling {
    pub w: usize,
    pub h: usize,
    pub labels: Vec<u32>,
    pub components: Vec<Component>,
}

impl Labeling {
    pub fn label(&self, x: usize, y: usize) -> u32 {
        self.labels[x + self.w * y]
    }

    /// Label of the largest component; ties go to the smallest anchor.
    pub fn largest(&self) -> Option<u32> {
        // Components are already in anchor order, so the first maximum wins.
        let mut best: Option<(usize, usize)> = None;
        for (i, c) in self.components.iter().enumerate() {
            if best.is_none_or(|(_, area)| c.area > area) {
                best = Some((i, c.area));
            }
        }
        best.map(|(i, _)| i as u32 + 1)
    }

    /// Mask holding only pixels with `label`.
    pub fn component_mask(&self, label: u32) -> Mask2D {
        Mask2D::from_bits(self.w, self.h, self.labels.iter().map(|&l| l == label).collect())
    }
}

fn find(parent: &mut [u32], mut x: u32) -> u32 {
    while parent[x as usize] != x {
        let p = parent[x as usize];
        parent[x as usize] = parent[p as usize];
        x = p;
    }
    x
}

fn union(parent: &mut [u32], a: u32, b: u32) {
    let ra = find(parent, a);
    let rb = find(parent, b);
    if ra != rb {
        // Keep the smaller provisional label as root so anchors stay minimal.
        let (lo, hi) = if ra < rb { (ra, rb) } else { (rb, ra) };
        parent[hi as usize] = lo;
    }
}

/// Two-pass union-find labelling.
pub fn label(mask: &Mask2D, connectivity: Connectivity) -> Labeling {
    let (w, h) = (mask.w, mask.h);
    let mut labels = vec![0u32; w * h];
    let mut parent: Vec<u32> = vec![0];
    for y in 0..h {
        for x in 0..w {
            if !mask.get(x, y) {
                continue;
            }
            let mut neighbours = [0u32; 4];
            let mut n = 0;
            let mut push = |l: u32| {
                if l != 0 {
                    neighbours[n] = l;
                    n += 1;
                }
            };
            if x > 0 {
                push(labels[x - 1 + w * y]);
            }
            if y > 0 {
                push(labels[x + w * (y - 1)]);
                if connectivity == Connectivity::Eight {
                    if x > 0 {
                        push(labels[x - 1 + w * (y - 1)]);
                    }
                    if x + 1 < w {
                        push(labels[x + 1 + w * (y - 1)]);
                    }
                }
            }
            let l = if n == 0 {
                let fresh = parent.len() as u32;
                parent.push(fresh);
                fresh
            } else {
                let m = *neighbours[..n].iter().min().unwrap();
                for &o in &neighbours[..n] {
                    union(&mut parent, m, o);
                }
                m
            };
            labels[x + w * y] = l;
        }
    }

    // Provisional labels are created in raster order and roots are always the
    // smallest member, so numbering roots in increasing order gives anchor order.
    let mut final_label = vec![0u32; parent.len()];
    let mut next = 0u32;
    for l in 1..parent.len() as u32 {
        let r = find(&mut parent, l);
        if r == l {
            next += 1;
            final_label[l as usize] = next;
        }
    }
    for l in 1..parent.len() as u32 {
        let r = find(&mut parent, l);
        final_label[l as usize] = final_label[r as usize];
    }

    let mut components: Vec<Option<Component>> = vec![None; next as usize];
    for y in 0..h {
        for x in 0..w {
            let idx = x + w * y;
            if labels[idx] == 0 {
                continue;
            }
            let l = final_label[labels[idx] as usize];
            labels[idx] = l;
            let c = components[l as usize - 1].get_or_insert(Component {
                area: 0,
                x_min: x,
                y_min: y,
                x_max: x,
                y_max: y,
                anchor: (x, y),
            });
            c.area += 1;
            c.x_min = c.x_min.min(x);
            c.x_max = c.x_max.max(x);
            c.y_max = c.y_max.max(y);
        }
    }

    Labeling {
        w,
        h,
        labels,
        components: components.into_iter().map(|c| c.expect("every label has pixels")).collect(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    /// Flood fill from every unvisited pixel in raster order.
    fn brute_components(m: &Mask2D, conn: Connectivity) -> Vec<Vec<(usize, usize)>> {
        let mut seen = vec![false; m.w * m.h];
        let mut out = Vec::new();
        for (sx, sy) in m.pixels().collect::<Vec<_>>() {
            if seen[sx + m.w * sy] {
                continue;
            }
            let mut stack = vec![(sx, sy)];
            seen[sx + m.w * sy] = true;
            let mut members = Vec::new();
            while let Some((x, y)) = stack.pop() {
                members.push((x, y));
                for dy in -1i64..=1 {
                    for dx in -1i64..=1 {
                        if (dx == 0 && dy == 0)
                            || (conn == Connectivity::Four && dx != 0 && dy != 0)
                        {
                            continue;
                        }
                        let (nx, ny) = (x as i64 + dx, y as i64 + dy);
                        if nx < 0 || ny < 0 || nx >= m.w as i64 || ny >= m.h as i64 {
                            continue;
                        }
                        let (nx, ny) = (nx as usize, ny as usize);
                        if m.get(nx, ny) && !seen[nx + m.w * ny] {
                            seen[nx + m.w * ny] = true;
                            stack.push((nx, ny));
                        }
                    }
                }
            }
            out.push(members);
        }
        out
    }

    #[test]
    fn diagonal_connectivity() {
        let m = Mask2D::from_ascii(&["#.##", ".##.", "....", "...#"]);
        assert_eq!(label(&m, Connectivity::Four).components.len(), 3);
        assert_eq!(label(&m, Connectivity::Eight).components.len(), 2);
    }

    #[test]
    fn u_shape_merges_to_one_label_with_top_left_anchor() {
        let m = Mask2D::from_ascii(&["#..#", "#..#", "####"]);
        let l = label(&m, Connectivity::Four);
        assert_eq!(l.components.len(), 1);
        assert_eq!(l.components[0].anchor, (0, 0));
        assert_eq!(l.components[0].area, 8);
    }

    #[test]
    fn largest_ties_use_anchor() {
        let m = Mask2D::from_ascii(&["##..##", "......", "###..."]);
        let l = label(&m, Connectivity::Eight);
        assert_eq!(l.largest(), Some(3));
        let m = Mask2D::from_ascii(&["##..##"]);
        assert_eq!(label(&m, Connectivity::Eight).largest(), Some(1));
        assert_eq!(label(&Mask2D::new(3, 3), Connectivity::Eight).largest(), None);
    }

    proptest! {
        #[test]
        fn matches_flood_fill(
            w in 1usize..20, h in 1usize..20, seed in any::<u64>(), density in 0.2f64..0.8,
            four in any::<bool>(),
        ) {
            use rand::{Rng, SeedableRng};
            let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
            let bits = (0..w * h).map(|_| rng.random_bool(density)).collect();
            let m = Mask2D::from_bits(w, h, bits);
            let conn = if four { Connectivity::Four } else { Connectivity::Eight };
            let l = label(&m, conn);
            let brute = brute_components(&m, conn);
            prop_assert_eq!(l.components.len(), brute.len());
            for (i, members) in brute.iter().enumerate() {
                let c = l.components[i];
                prop_assert_eq!(c.area, members.len());
                prop_assert_eq!(c.anchor, members.iter().map(|&(x, y)| (y, x)).min().map(|(y, x)| (x, y)).unwrap());
                prop_assert_eq!(c.x_min, members.iter().map(|p| p.0).min().unwrap());
                prop_assert_eq!(c.y_max, members.iter().map(|p| p.1).max().unwrap());
                for &(x, y) in members {
                    prop_assert_eq!(l.label(x, y), i as u32 + 1);
                }
            }
        }
    }
}
