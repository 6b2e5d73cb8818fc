use std::collections::HashMap;
use std::time::Instant;

use battbayes_core::posterior::mean_sd;
use battbayes_core::sampler::toys::{ConjugateNormal, FixedDensity};
use battbayes_core::sampler::{mh_update, run_mcmc, RngStreams, Target};
use battbayes_core::{DistSpec, SamplerConfig};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

fn toy() -> ConjugateNormal {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let noise = Normal::new(12.0, 2.0).unwrap();
    let data = (0..5).map(|_| noise.sample(&mut rng)).collect();
    ConjugateNormal::new(8.0, 3.0, 2.0, data)
}

#[test]
fn conjugate_normal_matches_closed_form() {
    let mut target = toy();
    let (mean, sd) = target.posterior();
    let cfg = SamplerConfig::new(10_000, 42).with_tuning([("theta", (2.4 * sd).min(target.prior_sd))]);
    let start = Instant::now();
    let chains = run_mcmc(&mut target, &cfg).unwrap();
    let elapsed = start.elapsed();
    let (m, s) = mean_sd(chains.get("theta").unwrap().post_burn_in());
    assert!((m - mean).abs() < 0.02 * mean.abs(), "mean {m} vs {mean}");
    assert!((s - sd).abs() < 0.05 * sd, "sd {s} vs {sd}");
    assert!(elapsed.as_secs_f64() < 5.0);
}

#[test]
fn acceptance_rate_is_moderate_at_prior_tuning() {
    let mut target = toy();
    let cfg = SamplerConfig::new(10_000, 5).with_tuning([("theta", target.prior_sd)]);
    let chains = run_mcmc(&mut target, &cfg).unwrap();
    let rate = chains.get("theta").unwrap().acceptance_rate(10_000);
    assert!(rate > 0.05 && rate < 0.95, "acceptance {rate}");
}

#[test]
fn same_seed_same_chain() {
    let run = |seed| {
        let mut target = toy();
        let cfg = SamplerConfig::new(2_000, seed).with_tuning([("theta", 1.0)]);
        run_mcmc(&mut target, &cfg).unwrap()
    };
    assert_eq!(run(9), run(9));
    assert_ne!(run(9), run(10));
}

#[test]
fn tuning_above_prior_sd_is_rejected() {
    let mut target = toy();
    let cfg = SamplerConfig::new(10, 1).with_tuning([("theta", 3.5)]);
    assert!(run_mcmc(&mut target, &cfg).is_err());
    let cfg = SamplerConfig::new(10, 1);
    assert!(run_mcmc(&mut target, &cfg).is_err());
}

/// Counts transitions between bins of a discretized chain and checks that
/// the flux `i → j` matches `j → i` within 3σ for every well-populated pair.
fn detailed_balance(mut target: impl Target<Var = &'static str>, tuning: f64, width: f64, seed: u64) {
    let mut rngs = RngStreams::new(seed);
    let bin = |x: f64| (x / width).floor() as i64;
    for _ in 0..1_000 {
        mh_update(&mut target, "x", tuning, &mut rngs).unwrap();
    }
    let mut counts: HashMap<(i64, i64), f64> = HashMap::new();
    let mut prev = bin(target.value("x"));
    for _ in 0..1_000_000 {
        mh_update(&mut target, "x", tuning, &mut rngs).unwrap();
        let next = bin(target.value("x"));
        if next != prev {
            *counts.entry((prev, next)).or_default() += 1.0;
        }
        prev = next;
    }
    let mut checked = 0;
    for (&(i, j), &n_ij) in &counts {
        if i >= j {
            continue;
        }
        let n_ji = counts.get(&(j, i)).copied().unwrap_or(0.0);
        if n_ij + n_ji < 100.0 {
            continue;
        }
        let z = (n_ij - n_ji).abs() / (n_ij + n_ji).sqrt();
        assert!(z < 3.0, "bins {i}->{j}: {n_ij} vs {n_ji} (z = {z:.2})");
        checked += 1;
    }
    assert!(checked >= 10, "only {checked} bin pairs populated");
}

#[test]
fn detailed_balance_gamma_kernel() {
    detailed_balance(FixedDensity::new(DistSpec::gamma(5.0, 2.0)), 1.5, 0.5, 17);
}

#[test]
fn detailed_balance_beta_kernel() {
    detailed_balance(FixedDensity::new(DistSpec::beta(0.3, 0.15)), 0.1, 0.05, 18);
}

#[test]
fn detailed_balance_rayleigh_kernel() {
    detailed_balance(FixedDensity::new(DistSpec::rayleigh(1.0)), 0.0, 0.1, 19);
}

/// Stationary bin frequencies of an asymmetric-kernel chain match the target.
#[test]
fn gamma_chain_has_the_target_moments() {
    let mut target = FixedDensity::new(DistSpec::gamma(5.0, 2.0));
    let cfg = SamplerConfig::new(200_000, 4).with_tuning([("x", 1.5)]);
    let chains = run_mcmc(&mut target, &cfg).unwrap();
    let (m, s) = mean_sd(chains.get("x").unwrap().post_burn_in());
    assert!((m - 5.0).abs() < 0.1, "mean {m}");
    assert!((s - 2.0).abs() < 0.1, "sd {s}");
}
