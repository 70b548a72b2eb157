mod common;

use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use common::*;
use xrm3d::geometry::Dims;
use xrm3d::metrics;
use xrm3d::morphology;
use xrm3d::segment::{self, Mask3D, SegmenterConfig};
use xrm3d::synthgen::{self, PrimitiveSpec, SceneSpec, Shape};

fn single(shape: Shape) -> xrm3d::synthgen::Scene {
    let spec = SceneSpec {
        volume_id: "s".into(),
        dims: [40, 40, 40],
        voxel_size_um: pitch(),
        dtype: "u8".into(),
        background: BACKGROUND,
        classes: vec![],
        primitives: vec![PrimitiveSpec::new(shape, 0, [20.0, 20.0, 20.0], FOREGROUND)],
        rng_seed: 0,
        noise: None,
    };
    synthgen::generate_scene(&spec).unwrap()
}

#[test]
fn noise_free_cylinder_is_recovered_exactly() {
    // r = 6.5: every digital disk column is at least 3 wide.
    let s = single(Shape::Cylinder { radius: 6.5, depth: 24.0 });
    let m = segment::segment_roi(&s.volume, &SegmenterConfig::default());
    assert_eq!(m, s.class_masks[0]);
    assert_eq!(metrics::dice(&m, &s.class_masks[0]).unwrap(), 1.0);
    let three = segment::segment_roi_three_views(&s.volume, &SegmenterConfig::default());
    assert_eq!(metrics::dice(&three, &s.class_masks[0]).unwrap(), 1.0);
}

#[test]
fn segmenting_a_segmentation_is_a_fixed_point() {
    let s = single(Shape::CappedPillar { radius: 9.3, shaft_depth: 10.0 });
    let cfg = SegmenterConfig::default();
    let m = segment::segment_roi(&s.volume, &cfg);
    let as_volume = xrm3d::volume::Volume::from_fn(m.dims(), pitch(), xrm3d::DType::U8, |x, y, z| {
        if m.get(x, y, z) { 255.0 } else { 0.0 }
    })
    .unwrap();
    assert_eq!(segment::segment_roi(&as_volume, &cfg), m);
}

#[test]
fn background_only_roi() {
    let v = xrm3d::volume::Volume::filled(Dims::new(9, 9, 9), pitch(), xrm3d::DType::U8, BACKGROUND as f32).unwrap();
    assert!(segment::segment_roi(&v, &SegmenterConfig::default()).is_empty());
}

proptest! {
    #[test]
    fn open_close_filter_is_idempotent(w in 1usize..24, h in 1usize..24, seed in any::<u64>(), density in 0.2f64..0.8) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let m = random_mask2d(&mut rng, w, h, density);
        let f = |m: &morphology::Mask2D| morphology::close(&morphology::open(m, 1), 1);
        let once = f(&m);
        prop_assert_eq!(f(&once), once);
    }

    #[test]
    fn identical_views_binarize_at_half(values in proptest::collection::vec(0.0f32..=1.0, 1..64)) {
        let dims = Dims::new(values.len(), 1, 1);
        let sv = |view| segment::ScoreVolume::new(dims, values.clone(), view).unwrap();
        let fused = segment::fuse_views(&sv(segment::View::Axial), &sv(segment::View::Sagittal), &sv(segment::View::Coronal)).unwrap();
        let expected = Mask3D::from_bits(dims, values.iter().map(|&v| v >= 0.5).collect());
        prop_assert_eq!(fused, expected);
    }
}
