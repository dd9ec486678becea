use std::f64::consts::{PI, TAU};

use flatlab_core::density::{cover_density, ratio_at, upper_density_euclidean, CenterSampler, DEFAULT_LADDER};
use flatlab_core::sequences::{exp_lattice, lattice, Ambient, PointSequence, Rect};
use flatlab_core::weights::WeightModel;
use num_complex::Complex64;
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn c(re: f64, im: f64) -> Complex64 {
    Complex64::new(re, im)
}

fn random_points(rng: &mut ChaCha8Rng, n: usize, half: f64) -> PointSequence {
    let pts = (0..n)
        .map(|_| c(rng.gen_range(-half..half), rng.gen_range(-half..half)))
        .collect();
    PointSequence::new(pts, Ambient::Plane).unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn adding_a_point_never_lowers_a_ratio(
        seed in 0u64..1000,
        px in -10.0f64..10.0,
        py in -10.0f64..10.0,
        zx in -3.0f64..3.0,
        zy in -3.0f64..3.0,
    ) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let g = random_points(&mut rng, 40, 10.0);
        prop_assume!(!g.contains(c(px, py)));
        let w = WeightModel::quadratic(1.0);
        let z = c(zx, zy);
        let before = ratio_at(&g, &w, z, 6.0).unwrap();
        let after = ratio_at(&g.with_point(c(px, py)).unwrap(), &w, z, 6.0).unwrap();
        prop_assert!(after >= before);
    }
}

#[test]
fn ratio_is_lattice_periodic() {
    let s = 2.0;
    let g = lattice(s, Rect::centered(60.0).unwrap()).unwrap();
    let w = WeightModel::quadratic(1.0);
    for z in [c(0.3, 0.7), c(1.1, -0.4)] {
        let a = ratio_at(&g, &w, z, 20.0).unwrap();
        for shift in [c(s, 0.0), c(0.0, s), c(-3.0 * s, 2.0 * s)] {
            let b = ratio_at(&g, &w, z + shift, 20.0).unwrap();
            assert!((a - b).abs() < 0.02 * a, "{a} vs {b}");
        }
    }
}

#[test]
fn union_dominates_both_parts() {
    let w = WeightModel::quadratic(1.0);
    let window = Rect::centered(30.0).unwrap();
    let sampler = CenterSampler::Grid {
        window: Rect::centered(8.0).unwrap(),
        step: 2.0,
    };
    for seed in 0..5 {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let a = random_points(&mut rng, 300, 30.0);
        let b = random_points(&mut rng, 200, 30.0);
        let u = a.union(&b).unwrap();
        let da = upper_density_euclidean(&a, &w, window, &[10.0, 20.0], &sampler).unwrap().extrapolated;
        let db = upper_density_euclidean(&b, &w, window, &[10.0, 20.0], &sampler).unwrap().extrapolated;
        let du = upper_density_euclidean(&u, &w, window, &[10.0, 20.0], &sampler).unwrap().extrapolated;
        assert!(du >= da.max(db));
    }
}

#[test]
fn lattice_density_scales_inverse_square() {
    let w = WeightModel::quadratic(1.0);
    let window = Rect::centered(50.0).unwrap();
    let pts: Vec<(f64, f64)> = [1.0, 2f64.sqrt(), 2.0]
        .iter()
        .map(|&s| {
            let g = lattice(s, window).unwrap();
            let sampler = CenterSampler::lattice_cell(s, s, s / 2.0);
            let d = upper_density_euclidean(&g, &w, window, &DEFAULT_LADDER, &sampler).unwrap();
            (s.ln(), d.extrapolated.ln())
        })
        .collect();
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / 3.0;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / 3.0;
    let slope = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum::<f64>()
        / pts.iter().map(|p| (p.0 - mx).powi(2)).sum::<f64>();
    assert!((slope + 2.0).abs() < 0.1, "slope {slope}");
}

#[test]
fn cover_density_ignores_rotations() {
    let w = WeightModel::log_squared(1.0);
    let s = TAU / 4.0;
    let g = exp_lattice(s, 4, -30.0, 30.0).unwrap();
    let window = Rect::new(-25.0, 25.0, -25.0, 25.0).unwrap();
    let ladder = [5.0, 10.0, 20.0];
    let base_sampler = CenterSampler::lattice_cell(s, s, s / 2.0);
    let base = cover_density(&g, &w, window, &ladder, &base_sampler).unwrap().extrapolated;
    for theta in [0.3, 1.7, -2.4] {
        let rotated = g.map(|p| p * Complex64::from_polar(1.0, theta)).unwrap();
        let shifted_window = Rect::new(window.x0, window.x1, window.y0 + theta, window.y1 + theta).unwrap();
        let sampler = CenterSampler::Cell {
            origin: [0.0, theta],
            side_x: s,
            side_y: s,
            step: 0.25,
        };
        let d = cover_density(&rotated, &w, shifted_window, &ladder, &sampler).unwrap().extrapolated;
        assert!((d - base).abs() < 1e-6, "{d} vs {base}");
    }
    assert!((base - TAU / (s * s)).abs() < 0.05 * TAU / (s * s));
}

#[test]
fn critical_spacing_sits_at_one() {
    let w = WeightModel::quadratic(1.0);
    let window = Rect::centered(50.0).unwrap();
    let s = PI.sqrt();
    let g = lattice(s, window).unwrap();
    let d = upper_density_euclidean(&g, &w, window, &DEFAULT_LADDER, &CenterSampler::lattice_cell(s, s, s / 2.0))
        .unwrap();
    assert!((d.extrapolated - 1.0).abs() < 0.05);
    assert!(d.per_radius.windows(2).all(|t| t[0].r < t[1].r));
}
