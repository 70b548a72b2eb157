mod common;

use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use common::*;
use xrm3d::components::Connectivity;
use xrm3d::detect::{self, DetectError, DetectorConfig, ScoreMode};
use xrm3d::geometry::{Axis, Dims};
use xrm3d::io::Detections2D;
use xrm3d::synthgen::{self, PrimitiveSpec, SceneSpec, Shape};
use xrm3d::threshold::ThresholdMode;
use xrm3d::volume::{DType, Image2D, Volume};

fn raw_cfg(connectivity: Connectivity, min_area: usize) -> DetectorConfig {
    DetectorConfig {
        threshold: ThresholdMode::Fixed(0.5),
        connectivity,
        min_area,
        score_mode: ScoreMode::Contrast,
        class_index: 0,
        smoothing_radius: 0,
    }
}

/// Flood-fill component pixel lists.
fn flood(bits: &[bool], w: usize, h: usize, conn: Connectivity) -> Vec<Vec<(usize, usize)>> {
    let mut seen = vec![false; w * h];
    let mut out = Vec::new();
    for start in 0..w * h {
        if !bits[start] || seen[start] {
            continue;
        }
        seen[start] = true;
        let mut stack = vec![(start % w, start / w)];
        let mut members = Vec::new();
        while let Some((x, y)) = stack.pop() {
            members.push((x, y));
            for dy in -1i64..=1 {
                for dx in -1i64..=1 {
                    if (dx, dy) == (0, 0) || (conn == Connectivity::Four && dx != 0 && dy != 0) {
                        continue;
                    }
                    let (nx, ny) = (x as i64 + dx, y as i64 + dy);
                    if nx < 0 || ny < 0 || nx >= w as i64 || ny >= h as i64 {
                        continue;
                    }
                    let i = nx as usize + w * ny as usize;
                    if bits[i] && !seen[i] {
                        seen[i] = true;
                        stack.push((nx as usize, ny as usize));
                    }
                }
            }
        }
        out.push(members);
    }
    out
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(96))]

    #[test]
    fn boxes_match_brute_force_components(
        w in 1usize..=64, h in 1usize..=64, seed in any::<u64>(),
        density in 0.05f64..0.6, four in any::<bool>(), min_area in 1usize..5,
    ) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let m = random_mask2d(&mut rng, w, h, density);
        let img = Image2D::new(w, h, DType::U8, m.bits.iter().map(|&b| if b { 1.0 } else { 0.0 }).collect());
        let conn = if four { Connectivity::Four } else { Connectivity::Eight };
        let boxes = detect::detect_slice(&img, &raw_cfg(conn, min_area));
        let comps: Vec<_> = flood(&m.bits, w, h, conn).into_iter().filter(|c| c.len() >= min_area).collect();
        prop_assert_eq!(boxes.len(), comps.len());
        let mut expected: Vec<_> = comps.iter().map(|c| {
            (c.iter().map(|p| p.0).min().unwrap(), c.iter().map(|p| p.1).min().unwrap(),
             c.iter().map(|p| p.0).max().unwrap(), c.iter().map(|p| p.1).max().unwrap())
        }).collect();
        let mut got: Vec<_> = boxes.iter().map(|b| (b.x_min, b.y_min, b.x_max, b.y_max)).collect();
        expected.sort();
        got.sort();
        prop_assert_eq!(got, expected);
        for b in &boxes {
            prop_assert!((0.0..=1.0).contains(&b.score));
        }
    }
}

#[test]
fn boxes_are_tight() {
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let m = random_mask2d(&mut rng, 40, 40, 0.3);
    let img = Image2D::new(40, 40, DType::U8, m.bits.iter().map(|&b| b as u8 as f32).collect());
    let comps = flood(&m.bits, 40, 40, Connectivity::Eight);
    for b in detect::detect_slice(&img, &raw_cfg(Connectivity::Eight, 1)) {
        let c = comps
            .iter()
            .find(|c| c.iter().map(|p| p.0).min() == Some(b.x_min) && c.iter().map(|p| p.1).min() == Some(b.y_min)
                && c.iter().map(|p| p.0).max() == Some(b.x_max) && c.iter().map(|p| p.1).max() == Some(b.y_max))
            .expect("box belongs to a component");
        // Each side is touched by a member pixel, so shrinking it excludes one.
        assert!(c.iter().any(|p| p.0 == b.x_min));
        assert!(c.iter().any(|p| p.0 == b.x_max));
        assert!(c.iter().any(|p| p.1 == b.y_min));
        assert!(c.iter().any(|p| p.1 == b.y_max));
    }
}

fn cylinder_volume() -> Volume {
    // depth 5 centered at z=5.5 covers slices 3..=7.
    let spec = SceneSpec {
        volume_id: "c".into(),
        dims: [24, 24, 12],
        voxel_size_um: pitch(),
        dtype: "u8".into(),
        background: BACKGROUND,
        classes: vec![],
        primitives: vec![PrimitiveSpec::new(
            Shape::Cylinder { radius: 4.0, depth: 5.0 },
            0,
            [12.0, 12.0, 5.5],
            FOREGROUND,
        )],
        rng_seed: 0,
        noise: None,
    };
    synthgen::generate_scene(&spec).unwrap().volume
}

#[test]
fn cylinder_detected_on_its_slices() {
    let v = cylinder_volume();
    let boxes = detect::detect_volume(&v, Axis::Z, &DetectorConfig::default()).unwrap();
    let slices: Vec<usize> = boxes.iter().map(|b| b.slice_index).collect();
    assert_eq!(slices, vec![3, 4, 5, 6, 7]);
    assert!(boxes.iter().all(|b| b.axis == Axis::Z));
    let b = boxes[0];
    assert_eq!((b.x_min, b.y_min, b.x_max, b.y_max), (8, 8, 16, 16));
}

#[test]
fn constant_volume_has_no_detections() {
    let v = Volume::filled(Dims::new(16, 16, 8), pitch(), DType::U8, 77.0).unwrap();
    for cfg in [DetectorConfig::default(), DetectorConfig { threshold: ThresholdMode::Otsu, ..Default::default() }] {
        assert!(detect::detect_volume(&v, Axis::Z, &cfg).unwrap().is_empty());
    }
}

#[test]
fn detection_independent_of_thread_count() {
    let opts = SuiteOptions {
        dims: [96, 96, 48],
        count: 4..=6,
        opening_safe: false,
        noise: Some(default_noise()),
    };
    let s = synthgen::generate_scene(&random_scene(21, &opts)).unwrap();
    let run = |threads| {
        rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build()
            .unwrap()
            .install(|| detect::detect_volume(&s.volume, Axis::Y, &DetectorConfig::default()).unwrap())
    };
    let a = run(1);
    assert!(!a.is_empty());
    assert_eq!(a, run(4));
}

#[test]
fn export_import_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("dets.json");
    let boxes = detect::detect_volume(&cylinder_volume(), Axis::X, &DetectorConfig::default()).unwrap();
    let doc = Detections2D {
        volume_id: "c".into(),
        classes: vec!["via".into()],
        boxes,
    };
    detect::export_detections(&doc, &path).unwrap();
    assert_eq!(detect::import_detections(&path).unwrap(), doc);

    let empty = Detections2D {
        volume_id: "e".into(),
        classes: vec![],
        boxes: vec![],
    };
    detect::export_detections(&empty, &path).unwrap();
    assert!(detect::import_detections(&path).unwrap().boxes.is_empty());
}

#[test]
fn import_rejects_inverted_box() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("bad.json");
    std::fs::write(
        &path,
        r#"{"volume_id": "v", "classes": ["a"], "boxes": [
            {"class": 0, "x_min": 1, "y_min": 1, "x_max": 3, "y_max": 3, "score": 0.5, "axis": "z", "slice": 0},
            {"class": 0, "x_min": 5, "y_min": 1, "x_max": 3, "y_max": 3, "score": 0.5, "axis": "z", "slice": 1}
        ]}"#,
    )
    .unwrap();
    assert!(matches!(
        detect::import_detections(&path),
        Err(DetectError::InvalidBox { index: 1, .. })
    ));
    std::fs::write(&path, "{not json").unwrap();
    assert!(matches!(detect::import_detections(&path), Err(DetectError::Io(_))));
}
