use std::f64::consts::{PI, TAU};

use approx::assert_relative_eq;
use phonograde::features::{
    feature_grid, fit_burg, log_spectrum, segment_features, ArModel, FeatureConfig, FEATURE_DIM,
};
use phonograde::rng::SplitMix64;
use proptest::prelude::*;

const FS: f64 = 16_000.0;

fn ar2(radius: f64, hz: f64) -> Vec<f64> {
    let theta = TAU * hz / FS;
    vec![-2.0 * radius * theta.cos(), radius * radius]
}

fn drive(a: &[f64], n: usize, seed: u64) -> Vec<f64> {
    let mut rng = SplitMix64::new(seed);
    let mut x = vec![0.0; n + 500];
    for t in 0..x.len() {
        let mut v = rng.normal();
        for (k, c) in a.iter().enumerate() {
            if t > k {
                v -= c * x[t - k - 1];
            }
        }
        x[t] = v;
    }
    x.split_off(500)
}

#[test]
fn ar2_coefficients_and_pole_recovered() {
    for (radius, hz, seed) in [(0.95, 1000.0, 1), (0.9, 2500.0, 2), (0.98, 400.0, 3)] {
        let a = ar2(radius, hz);
        let m = fit_burg(&drive(&a, 4096, seed), 2, FS).unwrap();
        let (a1, a2) = (m.coefficients[0], m.coefficients[1]);
        let r_est = a2.sqrt();
        let f_est = (-a1 / (2.0 * r_est)).acos() * FS / TAU;
        assert!((f_est - hz).abs() / hz < 0.02, "{f_est} vs {hz}");
        assert!((r_est - radius).abs() < 0.02, "{r_est} vs {radius}");
        assert_relative_eq!(m.gain, 1.0, max_relative = 0.1);
    }
}

#[test]
fn log_spectrum_matches_direct_transfer_function() {
    let a = vec![-1.2, 0.5, 0.1, -0.05];
    let m = ArModel::from_coefficients(a.clone(), 2.5, FS);
    let grid = feature_grid();
    let got = log_spectrum(&m, &grid).unwrap();
    for (f, v) in grid.iter().zip(&got) {
        let w = TAU * f / FS;
        let (re, im) = a.iter().enumerate().fold((1.0, 0.0), |(re, im), (k, c)| {
            let ph = -w * (k + 1) as f64;
            (re + c * ph.cos(), im + c * ph.sin())
        });
        assert_relative_eq!(*v, (2.5 / (re * re + im * im)).ln(), max_relative = 1e-12);
    }
}

#[test]
fn white_noise_spectrum_is_flat_at_its_variance() {
    let mut rng = SplitMix64::new(4);
    let x: Vec<f64> = (0..16_000).map(|_| 2.0 * rng.normal()).collect();
    let spec = segment_features(&x, FS, &FeatureConfig::with_order(8)).unwrap();
    let mean = spec.iter().sum::<f64>() / spec.len() as f64;
    assert!((mean - 4.0f64.ln()).abs() < 0.1, "mean log level {mean}");
    assert!(spec.iter().all(|v| (v - mean).abs() < 0.3));
}

#[test]
fn tone_peak_lands_on_nearest_grid_point() {
    let grid = feature_grid();
    for hz in [500.0, 1000.0, 2200.0, 4100.0] {
        let x: Vec<f64> = (0..4096).map(|n| (2.0 * PI * hz * n as f64 / FS).sin()).collect();
        let spec = segment_features(&x, FS, &FeatureConfig::default()).unwrap();
        assert_eq!(spec.len(), FEATURE_DIM);
        let peak = (0..spec.len()).max_by(|&i, &j| spec[i].total_cmp(&spec[j])).unwrap();
        let nearest = (0..grid.len())
            .min_by(|&i, &j| (grid[i] - hz).abs().total_cmp(&(grid[j] - hz).abs()))
            .unwrap();
        assert_eq!(peak, nearest, "{hz} Hz");
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn reflection_coefficients_stay_inside_unit_circle(seed in any::<u64>(), len in 260usize..1200, order in 1usize..128) {
        let mut rng = SplitMix64::new(seed);
        let x: Vec<f64> = (0..len).map(|_| rng.normal()).collect();
        prop_assume!(len >= 2 * (order + 1));
        let m = fit_burg(&x, order, FS).unwrap();
        prop_assert_eq!(m.reflection.len(), order);
        prop_assert!(m.reflection.iter().all(|k| k.abs() <= 1.0));
        prop_assert!(m.stage_errors.windows(2).all(|w| w[1] <= w[0] * (1.0 + 1e-12)));
    }

    #[test]
    fn gain_shifts_features_by_a_constant(seed in any::<u64>(), c in 0.01f64..100.0) {
        let mut rng = SplitMix64::new(seed);
        let x: Vec<f64> = (0..600).map(|_| rng.normal()).collect();
        let y: Vec<f64> = x.iter().map(|v| c * v).collect();
        let cfg = FeatureConfig::default();
        let fx = segment_features(&x, FS, &cfg).unwrap();
        let fy = segment_features(&y, FS, &cfg).unwrap();
        for (a, b) in fx.iter().zip(&fy) {
            prop_assert!((b - a - 2.0 * c.ln()).abs() < 1e-8);
        }
    }
}
