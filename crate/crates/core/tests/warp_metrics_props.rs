mod common;

use common::*;
use proptest::prelude::*;
use splatkit::metrics::{combine, gaussian_blur3, psi_flow, psi_photo, psi_varia, Alphas};
use splatkit::warp::{backward_warp, reference_backward_warp};
use splatkit::{FlowField, Grid};

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn warp_matches_double_precision_reference(seed: u64, h in 1usize..12, w in 1usize..12, mag in 0.0f32..8.0) {
        let mut r = rng(seed);
        let src = random_grid(&mut r, h, w, 3, -1.0, 1.0);
        let flow = random_flow(&mut r, h, w, mag);
        let (got, _) = backward_warp(&src, &flow).unwrap();
        let expected = reference_backward_warp(&src, &flow).unwrap();
        for (a, b) in got.data().iter().zip(expected.data()) {
            prop_assert!((a - b).abs() < 1e-5, "{a} vs {b}");
        }
    }

    #[test]
    fn warp_mask_marks_in_range_samples(seed: u64, mag in 0.0f32..6.0) {
        let mut r = rng(seed);
        let src = random_grid(&mut r, 7, 9, 1, 0.0, 1.0);
        let flow = random_flow(&mut r, 7, 9, mag);
        let (_, mask) = backward_warp(&src, &flow).unwrap();
        for y in 0..7 {
            for x in 0..9 {
                let (u, v) = flow.vector(x, y);
                let (sx, sy) = (x as f32 + u, y as f32 + v);
                let inside = (0.0..=8.0).contains(&sx) && (0.0..=6.0).contains(&sy);
                prop_assert_eq!(mask.get(x, y), inside);
            }
        }
    }

    #[test]
    fn warp_outputs_stay_in_source_range(seed: u64) {
        let mut r = rng(seed);
        let src = random_grid(&mut r, 10, 10, 1, 0.0, 1.0);
        let flow = random_flow(&mut r, 10, 10, 20.0);
        let (out, _) = backward_warp(&src, &flow).unwrap();
        prop_assert!(out.data().iter().all(|&v| (-1e-6..=1.0 + 1e-6).contains(&v)));
    }

    #[test]
    fn blur_preserves_constants_and_mean_bounds(seed: u64, value in -10.0f32..10.0) {
        let c = Grid::filled(5, 7, 2, value);
        prop_assert_eq!(gaussian_blur3(&c), c);
        let mut r = rng(seed);
        let g = random_grid(&mut r, 6, 6, 1, 0.0, 1.0);
        let b = gaussian_blur3(&g);
        prop_assert!(b.data().iter().all(|&v| (0.0..=1.0).contains(&v)));
    }

    #[test]
    fn consistent_constant_flows_have_zero_flow_error(u in -5.0f32..5.0, v in -5.0f32..5.0) {
        let f = FlowField::constant(6, 6, u, v);
        let b = FlowField::constant(6, 6, -u, -v);
        // interpolating a constant can be off by an ulp
        prop_assert!(psi_flow(&f, &b).unwrap().data().iter().all(|&x| x <= 1e-6));
        prop_assert!(psi_varia(&f).data().iter().all(|&x| x == 0.0));
    }

    #[test]
    fn combine_range(p in 0.0f32..1e6, f in 0.0f32..1e6, v in 0.0f32..1e6) {
        let one = |x: f32| Grid::filled(1, 1, 1, x);
        let m = combine(&one(p), &one(f), &one(v), Alphas::default()).unwrap().data()[0];
        prop_assert!(m > 0.0 && m <= 3.0);
    }
}

#[test]
fn photo_error_vanishes_for_exact_translation() {
    let mut r = rng(3);
    let i1 = random_grid(&mut r, 12, 12, 3, 0.0, 1.0);
    // I0(p) = I1(p + (2, 1)) away from the borders
    let i0 = Grid::from_fn(12, 12, 3, |x, y, c| i1.get((x + 2).min(11), (y + 1).min(11), c));
    let f = FlowField::constant(12, 12, 2.0, 1.0);
    let psi = psi_photo(&i0, &i1, &f).unwrap();
    for y in 0..11 {
        for x in 0..10 {
            assert_eq!(psi.get(x, y, 0), 0.0);
        }
    }
}

#[test]
fn varia_is_larger_at_motion_boundaries() {
    let f = FlowField::from_fn(16, 16, |x, _| (if x < 8 { 0.0 } else { 4.0 }, 0.0));
    let v = psi_varia(&f);
    assert!(v.get(7, 8, 0) > 1.0);
    assert_eq!(v.get(2, 8, 0), 0.0);
    assert_eq!(v.get(13, 8, 0), 0.0);
}
