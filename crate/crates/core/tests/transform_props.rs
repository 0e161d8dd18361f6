use formctl_core::cbt::{Block, CbtTransform, GroupPartition, ShapeCoordinates};
use formctl_core::dynamics::{assemble_augmented, RobotParams, RobotState, TorqueInput};
use formctl_core::cbt::transform_dynamics;
use nalgebra::{DVector, Vector2};
use proptest::prelude::*;

fn partition() -> impl Strategy<Value = Vec<usize>> {
    prop::collection::vec(2usize..=6, 1..=4)
}

proptest! {
    #[test]
    fn round_trip(sizes in partition(), seed in prop::collection::vec(-50.0f64..50.0, 48)) {
        let t = CbtTransform::new(&GroupPartition::new(sizes).unwrap()).unwrap();
        let n = t.robots();
        let x = DVector::from_fn(2 * n, |k, _| seed[k % seed.len()] + k as f64 * 0.37);
        let back = t.apply_inverse(&t.apply(&x).unwrap()).unwrap();
        prop_assert!((back - &x).amax() < 1e-10);
        let shape = t.to_shape(&x).unwrap();
        prop_assert_eq!(t.from_shape(&shape).unwrap().len(), 2 * n);
    }

    #[test]
    fn shapes_ignore_translation_and_centroid_follows_it(
        sizes in partition(),
        cx in -100.0f64..100.0,
        cy in -100.0f64..100.0,
    ) {
        let t = CbtTransform::new(&GroupPartition::new(sizes).unwrap()).unwrap();
        let n = t.robots();
        let x = DVector::from_fn(2 * n, |k, _| ((k * 7919) % 23) as f64 - 11.0);
        let moved = DVector::from_fn(2 * n, |k, _| x[k] + if k % 2 == 0 { cx } else { cy });
        let a = t.to_shape(&x).unwrap();
        let b = t.to_shape(&moved).unwrap();
        prop_assert!((&a.intra - &b.intra).amax() < 1e-11);
        prop_assert!((&a.inter - &b.inter).amax() < 1e-11);
        prop_assert!((b.centroid - a.centroid - Vector2::new(cx, cy)).amax() < 1e-11);
    }

    #[test]
    fn block_ranges_tile_the_stacked_vector(sizes in partition()) {
        let p = GroupPartition::new(sizes.clone()).unwrap();
        let t = CbtTransform::new(&p).unwrap();
        let n = p.robots();
        let m = p.groups();
        prop_assert_eq!(t.stacked_range(Block::Intra), 0..2 * (n - m));
        prop_assert_eq!(t.stacked_range(Block::Inter), 2 * (n - m)..2 * (n - 1));
        prop_assert_eq!(t.stacked_range(Block::Centroid), 2 * (n - 1)..2 * n);
    }
}

#[test]
fn split_matches_block_ranges() {
    let t = CbtTransform::new(&GroupPartition::new(vec![2, 4]).unwrap()).unwrap();
    let z = DVector::from_fn(12, |k, _| k as f64);
    let s = ShapeCoordinates::split(&t, &z);
    assert_eq!(s.intra.len(), 8);
    assert_eq!(s.inter.len(), 2);
    assert_eq!(s.centroid, Vector2::new(10.0, 11.0));
    assert_eq!(s.stacked(), z);
}

#[test]
fn transformed_dynamics_equal_mapped_accelerations() {
    // Z̈ computed as Φ·Ẍ versus P·Ż + R + Φ·B·U
    let t = CbtTransform::new(&GroupPartition::new(vec![3, 2]).unwrap()).unwrap();
    let params = vec![RobotParams::default(); 5];
    let states: Vec<RobotState> = (0..5)
        .map(|i| {
            let f = i as f64;
            RobotState {
                position: Vector2::new(f, -0.5 * f),
                velocity: Vector2::new(0.3 - 0.1 * f, 0.2 * f),
                heading: 0.7 * f - 1.0,
                heading_rate: 0.4 - 0.15 * f,
            }
        })
        .collect();
    let torques: Vec<TorqueInput> = (0..5).map(|i| TorqueInput::new(0.1 * i as f64, -0.2)).collect();
    let sys = assemble_augmented(&states, &params, &torques).unwrap();
    let mapped = t.apply(&sys.accel()).unwrap();
    let dynamics = transform_dynamics(&t, &sys.a, &sys.c).unwrap();
    let z_dot = t.apply(&sys.x_dot).unwrap();
    let direct = &dynamics.p * z_dot + &dynamics.r + t.apply(&(&sys.b * &sys.u)).unwrap();
    assert!((mapped - direct).amax() < 1e-12);
}
