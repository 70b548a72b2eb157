//! Shared phantom suites and brute-force oracles for integration tests.
#![allow(dead_code)]

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use xrm3d::geometry::{Axis, Cuboid3D, Dims};
use xrm3d::micron::Microns;
use xrm3d::morphology::{self, Mask2D};
use xrm3d::segment::Mask3D;
use xrm3d::synthgen::{self, NoiseSpec, PrimitiveSpec, SceneSpec, Shape};

pub const BACKGROUND: f64 = 40.0;
pub const FOREGROUND: f64 = 200.0;
/// Minimum clearance between primitives, in voxels, along xy or z.
pub const CLEARANCE: f64 = 8.0;

pub fn pitch() -> Microns {
    "0.7".parse().unwrap()
}

pub fn default_noise() -> NoiseSpec {
    NoiseSpec {
        sigma: 0.1,
        blur_radius: 1,
    }
}

/// TSV-like cylinders, bump-like capped pillars and flat pads.
pub fn random_shape(rng: &mut ChaCha8Rng) -> Shape {
    match rng.random_range(0..3) {
        0 => Shape::Cylinder {
            radius: rng.random_range(4.0..8.0),
            depth: rng.random_range(16.0..48.0),
        },
        1 => Shape::CappedPillar {
            radius: rng.random_range(8.0..14.3),
            shaft_depth: rng.random_range(6.0..20.0),
        },
        _ => Shape::Box {
            w: rng.random_range(6.0..24.0),
            h: rng.random_range(6.0..24.0),
            d: rng.random_range(3.0..8.0),
        },
    }
}

fn separated(a: &[(f64, f64); 3], b: &[(f64, f64); 3]) -> bool {
    let gap = |i: usize| (b[i].0 - a[i].1).max(a[i].0 - b[i].1);
    gap(0).max(gap(1)) >= CLEARANCE || gap(2) >= CLEARANCE
}

/// Every axial slice of the primitive is unchanged by the 3×3 opening and
/// closing used downstream.
pub fn axially_opening_safe(p: &PrimitiveSpec, dims: Dims) -> bool {
    let Ok(mask) = synthgen::rasterize(p, 0, dims) else {
        return false;
    };
    // Pad so that opening/closing see background around the footprint.
    let frame = mask.frame().expanded(3, dims);
    let padded = mask.reframe(&frame);
    (0..padded.dims().nz).all(|z| {
        let s = padded.slice(Axis::Z, z);
        morphology::open(&s, 1) == s && morphology::close(&s, 1) == s
    })
}

pub struct SuiteOptions {
    pub dims: [usize; 3],
    pub count: std::ops::RangeInclusive<usize>,
    pub opening_safe: bool,
    pub noise: Option<NoiseSpec>,
}

/// Seeded random scene of mutually separated primitives, all of class 0.
pub fn random_scene(seed: u64, opts: &SuiteOptions) -> SceneSpec {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let dims = Dims::new(opts.dims[0], opts.dims[1], opts.dims[2]);
    let target = rng.random_range(opts.count.clone());
    let mut primitives: Vec<PrimitiveSpec> = Vec::new();
    let mut bounds: Vec<[(f64, f64); 3]> = Vec::new();
    let mut attempts = 0;
    while primitives.len() < target {
        attempts += 1;
        assert!(attempts < 100_000, "could not place {target} primitives");
        let shape = random_shape(&mut rng);
        let center = [
            rng.random_range(0.0..dims.nx as f64),
            rng.random_range(0.0..dims.ny as f64),
            rng.random_range(0.0..dims.nz as f64),
        ];
        let p = PrimitiveSpec::new(shape, 0, center, FOREGROUND);
        let b = p.analytic_bounds();
        // Keep a few voxels of background between the object and the border.
        let inside = (0..3).all(|i| b[i].0 >= 4.0 && b[i].1 <= dims.as_array()[i] as f64 - 5.0);
        if !inside || bounds.iter().any(|o| !separated(o, &b)) {
            continue;
        }
        if synthgen::rasterize(&p, 0, dims).is_err() {
            continue;
        }
        if opts.opening_safe && !axially_opening_safe(&p, dims) {
            continue;
        }
        primitives.push(p);
        bounds.push(b);
    }
    SceneSpec {
        volume_id: format!("suite-{seed}"),
        dims: opts.dims,
        voxel_size_um: pitch(),
        dtype: "u8".into(),
        background: BACKGROUND,
        classes: vec!["structure".into()],
        primitives,
        rng_seed: seed,
        noise: opts.noise,
    }
}

pub fn count_voxels(c: &Cuboid3D) -> u64 {
    c.volume()
}

/// Brute-force box intersection and union over an enclosing grid.
pub fn brute_iou3d(a: &Cuboid3D, b: &Cuboid3D) -> (u64, u64) {
    let hi = [
        (a.x + a.w).max(b.x + b.w),
        (a.y + a.h).max(b.y + b.h),
        (a.z + a.d).max(b.z + b.d),
    ];
    let (mut inter, mut union) = (0, 0);
    for z in 0..hi[2] {
        for y in 0..hi[1] {
            for x in 0..hi[0] {
                let (ia, ib) = (a.contains([x, y, z]), b.contains([x, y, z]));
                inter += (ia && ib) as u64;
                union += (ia || ib) as u64;
            }
        }
    }
    (inter, union)
}

pub fn random_mask(rng: &mut ChaCha8Rng, dims: Dims, density: f64) -> Mask3D {
    let bits = (0..dims.len()).map(|_| rng.random_bool(density)).collect();
    Mask3D::from_bits(dims, bits)
}

pub fn random_mask2d(rng: &mut ChaCha8Rng, w: usize, h: usize, density: f64) -> Mask2D {
    Mask2D::from_bits(w, h, (0..w * h).map(|_| rng.random_bool(density)).collect())
}

/// Percentile by nearest rank.
pub fn percentile(values: &[f64], p: f64) -> f64 {
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    if v.is_empty() {
        return 0.0;
    }
    let rank = ((p / 100.0) * v.len() as f64).ceil() as usize;
    v[rank.clamp(1, v.len()) - 1]
}
