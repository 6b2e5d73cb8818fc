use battbayes_core::preprocess::{autocorrelation, block_average, decorrelation_lag, reduce_paired};
use battbayes_core::TimeSeries;
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Literal double loop: mean and population variance over the whole series,
/// lagged products averaged over the available pairs.
fn brute_force(y: &[f64], lag: usize) -> f64 {
    let n = y.len();
    let mut mu = 0.0;
    for v in y {
        mu += v;
    }
    mu /= n as f64;
    let mut var = 0.0;
    for v in y {
        var += (v - mu) * (v - mu);
    }
    var /= n as f64;
    let mut cov = 0.0;
    for s in 0..n - lag {
        cov += (y[s] - mu) * (y[s + lag] - mu);
    }
    cov / (n - lag) as f64 / var
}

fn brute_lag(y: &[f64], threshold: f64) -> usize {
    (1..y.len()).find(|&l| brute_force(y, l) < threshold).unwrap_or(y.len())
}

/// Moving sum of `width` white-noise terms: the autocorrelation falls
/// linearly and first drops below 0.2 at lag 7 when `width` is 8.
fn moving_sum(n: usize, width: usize, seed: u64) -> Vec<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let e: Vec<f64> = (0..n + width).map(|_| rng.gen_range(-1.0..1.0)).collect();
    (0..n).map(|i| e[i..i + width].iter().sum()).collect()
}

#[test]
fn matches_brute_force_on_random_series() {
    let mut rng = ChaCha8Rng::seed_from_u64(100);
    for _ in 0..100 {
        let n = rng.gen_range(10..400);
        let y: Vec<f64> = (0..n).map(|_| rng.gen_range(-5.0..5.0) + rng.gen_range(0.0..1.0) * 10.0).collect();
        let series = TimeSeries::new(y.clone(), 1.0);
        for lag in [0, 1, 2, n / 3, n - 1] {
            let a = autocorrelation(&series, lag).unwrap();
            assert!((a - brute_force(&y, lag)).abs() < 1e-12);
        }
    }
}

#[test]
fn constructed_series_decorrelates_at_seven() {
    let y = moving_sum(20_000, 8, 1);
    assert_eq!(brute_lag(&y, 0.2), 7);
    assert_eq!(decorrelation_lag(&TimeSeries::new(y, 1.0), 0.2).unwrap(), 7);
}

#[test]
fn white_noise_decorrelates_immediately() {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let y: Vec<f64> = (0..2_000).map(|_| rng.gen_range(-1.0..1.0)).collect();
    let lag = decorrelation_lag(&TimeSeries::new(y.clone(), 1.0), 0.2).unwrap();
    assert!(lag <= 3);
    assert_eq!(lag, brute_lag(&y, 0.2));
}

#[test]
fn ramp_agrees_with_oracle() {
    let y: Vec<f64> = (0..200).map(|i| i as f64).collect();
    assert_eq!(decorrelation_lag(&TimeSeries::new(y.clone(), 1.0), 0.2).unwrap(), brute_lag(&y, 0.2));
}

#[test]
fn paired_reduction_keeps_channels_aligned() {
    let a = moving_sum(700, 8, 2);
    let v: Vec<f64> = (0..700).map(|i| 10.0 + (i as f64 / 50.0).sin()).collect();
    let (ra, rv, lag) = reduce_paired(&TimeSeries::new(a, 1.0), &TimeSeries::new(v, 1.0), 0.2);
    assert_eq!(lag, 7);
    assert_eq!(ra.len(), rv.len());
    assert_eq!(ra.len(), 100);
    assert_eq!(rv.sample_period, 7.0);
}

proptest! {
    #[test]
    fn block_average_preserves_mean(blocks in 1usize..50, factor in 1usize..12, seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let y: Vec<f64> = (0..blocks * factor).map(|_| rng.gen_range(-100.0..100.0)).collect();
        let s = TimeSeries::new(y, 0.5);
        let b = block_average(&s, factor);
        prop_assert_eq!(b.len(), blocks);
        prop_assert!((b.mean() - s.mean()).abs() < 1e-12);
        prop_assert_eq!(b.sample_period, 0.5 * factor as f64);
    }

    #[test]
    fn threshold_above_one_gives_lag_one(y in prop::collection::vec(-1e3..1e3f64, 3..100)) {
        let s = TimeSeries::new(y, 1.0);
        if let Ok(lag) = decorrelation_lag(&s, 1.01) {
            prop_assert_eq!(lag, 1);
        }
    }

    #[test]
    fn lag_zero_is_one(y in prop::collection::vec(-1e3..1e3f64, 2..100)) {
        if let Ok(a) = autocorrelation(&TimeSeries::new(y, 1.0), 0) {
            prop_assert!((a - 1.0).abs() < 1e-12);
        }
    }
}
