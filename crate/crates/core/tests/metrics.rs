mod common;

use num_rational::Ratio;
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use common::*;
use xrm3d::geometry::{Cuboid3D, Dims};
use xrm3d::metrics;

proptest! {
    #[test]
    fn dice_relates_to_iou(seed in any::<u64>(), dx in 0.0f64..1.0, dy in 0.0f64..1.0) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let dims = Dims::new(rng.random_range(1..10), rng.random_range(1..10), rng.random_range(1..10));
        let (x, y) = (random_mask(&mut rng, dims, dx), random_mask(&mut rng, dims, dy));
        let d = metrics::dice_ratio(&x, &y).unwrap();
        prop_assert_eq!(d, metrics::dice_ratio(&y, &x).unwrap());
        let inter = x.bits().iter().zip(y.bits()).filter(|(a, b)| **a && **b).count() as u64;
        let union = x.bits().iter().zip(y.bits()).filter(|(a, b)| **a || **b).count() as u64;
        if union > 0 {
            let iou = Ratio::new(inter, union);
            prop_assert_eq!(d, iou * 2 / (iou + 1));
        }
        if !x.is_empty() {
            prop_assert_eq!(metrics::dice(&x, &x).unwrap(), 1.0);
        }
    }

    #[test]
    fn match_cardinalities(seed in any::<u64>(), np in 0usize..15, ng in 0usize..15, t in 0.1f64..0.9) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let cuboid = |rng: &mut ChaCha8Rng| {
            let s = [rng.random_range(0..10), rng.random_range(0..10), rng.random_range(0..10)];
            let e = [rng.random_range(1..6), rng.random_range(1..6), rng.random_range(1..6)];
            Cuboid3D::new(0, s, e).with_score(rng.random_range(0.0..=1.0))
        };
        let preds: Vec<_> = (0..np).map(|_| cuboid(&mut rng)).collect();
        let gts: Vec<_> = (0..ng).map(|_| cuboid(&mut rng)).collect();
        let m = metrics::match_detections_3d(&preds, &gts, t);
        prop_assert_eq!(m.true_positives.len() + m.false_positives.len(), np);
        prop_assert_eq!(m.true_positives.len() + m.false_negatives.len(), ng);
        let mut used: Vec<usize> = m.true_positives.iter().map(|tp| tp.gt).collect();
        used.sort_unstable();
        used.dedup();
        prop_assert_eq!(used.len(), m.true_positives.len());
        for tp in &m.true_positives {
            prop_assert!(tp.iou >= t);
        }
    }

    #[test]
    fn iou3d_matches_brute_force(seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut cuboid = || {
            let s = [rng.random_range(0..12), rng.random_range(0..12), rng.random_range(0..12)];
            let e = [rng.random_range(1..12), rng.random_range(1..12), rng.random_range(1..12)];
            Cuboid3D::new(0, s, e)
        };
        let (a, b) = (cuboid(), cuboid());
        let iou = metrics::iou3d(&a, &b);
        prop_assert_eq!((iou.intersection, iou.union), brute_iou3d(&a, &b));
        prop_assert_eq!(iou, metrics::iou3d(&b, &a));
        prop_assert_eq!(iou.intersection == iou.union, a.geometry_eq(&b));
    }
}
