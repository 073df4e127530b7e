mod common;

use common::{oracle_samples, random_shape, skeleton, KINDS};
use proptest::prelude::*;
use psg_core::geometry::{brute_force_distance, closest_points, rot_x, rot_z, Pose, Shape, SkeletonKind, Vec3};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn kind_strategy() -> impl Strategy<Value = SkeletonKind> {
    prop::sample::select(KINDS.to_vec())
}

fn shapes() -> impl Strategy<Value = (Shape, Shape)> {
    (kind_strategy(), kind_strategy(), any::<u64>()).prop_map(|(ka, kb, seed)| {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        (random_shape(&mut rng, ka), random_shape(&mut rng, kb))
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(2000))]

    #[test]
    fn analytic_matches_sampling_oracle((sa, sb) in shapes()) {
        let a = skeleton("a", sa);
        let b = skeleton("b", sb);
        let r = closest_points(&a, &b).unwrap();
        let n = oracle_samples(sa.kind, sb.kind);
        let brute = brute_force_distance(&a, &b, n);
        let bound = 2.0 * sa.extent().max(sb.extent()) / n as f64;
        prop_assert!(r.surface_distance <= brute + 1e-12, "analytic {} above oracle {}", r.surface_distance, brute);
        prop_assert!(brute - r.surface_distance <= bound + 1e-12, "gap {} > bound {}", brute - r.surface_distance, bound);
    }

    #[test]
    fn symmetric_and_clamped((sa, sb) in shapes()) {
        let ab = sa.closest(&sb).unwrap();
        let ba = sb.closest(&sa).unwrap();
        prop_assert!((ab.center_distance - ba.center_distance).abs() <= 1e-9);
        for f in [ab.s_i, ab.t_i, ab.s_j, ab.t_j] {
            prop_assert!((0.0..=1.0).contains(&f));
        }
        prop_assert!((ab.u + ab.w - sb.at(ab.s_j, ab.t_j)).norm() <= 1e-9);
        prop_assert!((ab.u - sa.at(ab.s_i, ab.t_i)).norm() <= 1e-12);
    }

    #[test]
    fn rigid_motion_invariance((sa, sb) in shapes(), ax in -3.0..3.0f64, az in -3.0..3.0f64,
                               tx in -2.0..2.0f64, ty in -2.0..2.0f64, tz in -2.0..2.0f64) {
        let pose = Pose::new(rot_z(az) * rot_x(ax), Vec3::new(tx, ty, tz));
        let d0 = sa.closest(&sb).unwrap().surface_distance;
        let d1 = sa.transformed(&pose).closest(&sb.transformed(&pose)).unwrap().surface_distance;
        prop_assert!((d0 - d1).abs() < 1e-9, "{} vs {}", d0, d1);
    }
}

#[test]
fn distance_is_lipschitz_along_straight_path() {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    for ka in KINDS {
        for kb in KINDS {
            let a = random_shape(&mut rng, ka);
            let b = random_shape(&mut rng, kb);
            let dir = common::random_unit(&mut rng);
            let step = 1e-4;
            let mut prev = a.closest(&b).unwrap().surface_distance;
            for k in 1..=10_000 {
                let moved = a.transformed(&Pose::from_translation(dir * (k as f64 * step) - dir));
                let d = moved.closest(&b).unwrap().surface_distance;
                if k > 1 {
                    assert!((d - prev).abs() <= step + 1e-9, "{ka:?}-{kb:?} jump {} at step {k}", (d - prev).abs());
                }
                prev = d;
            }
        }
    }
}
