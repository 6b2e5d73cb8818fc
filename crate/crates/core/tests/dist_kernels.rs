use battbayes_core::dist::NativeParams;
use battbayes_core::posterior::{fit_moments, mean_sd};
use battbayes_core::{DistSpec, Family};
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn representative() -> Vec<DistSpec> {
    vec![
        DistSpec::normal(0.0, 1.0),
        DistSpec::normal(300.0, 2.0),
        DistSpec::gamma(2.0, 1.0),
        DistSpec::gamma(5.0, 4.0),
        DistSpec::gamma(30_000.0, 3_000.0),
        DistSpec::beta(0.5, 0.1),
        DistSpec::beta(0.8, 0.15),
        DistSpec::beta(0.3, 0.2),
        DistSpec::rayleigh(1.0),
        DistSpec::rayleigh(0.25),
    ]
}

/// Composite Simpson over [lo, hi] with `n` (even) panels.
fn simpson(f: impl Fn(f64) -> f64, lo: f64, hi: f64, n: usize) -> f64 {
    let h = (hi - lo) / n as f64;
    let mut s = f(lo) + f(hi);
    for i in 1..n {
        let w = if i % 2 == 1 { 4.0 } else { 2.0 };
        s += w * f(lo + i as f64 * h);
    }
    s * h / 3.0
}

fn support(spec: &DistSpec) -> (f64, f64) {
    let sd = spec.effective_sd().unwrap();
    match spec.family {
        Family::Normal => (spec.mean - 12.0 * sd, spec.mean + 12.0 * sd),
        Family::Gamma | Family::Rayleigh => (1e-12, spec.mean + 30.0 * sd),
        Family::Beta => (1e-12, 1.0 - 1e-12),
    }
}

#[test]
fn densities_integrate_to_one() {
    for spec in representative() {
        let (lo, hi) = support(&spec);
        let area = simpson(|x| spec.log_pdf(x).unwrap().exp(), lo, hi, 400_000);
        assert!((area - 1.0).abs() < 1e-3, "{spec:?} integrates to {area}");
    }
}

#[test]
fn draws_refit_to_their_moments() {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    for spec in representative() {
        let xs: Vec<f64> = (0..100_000).map(|_| spec.draw(&mut rng).unwrap()).collect();
        let fit = fit_moments(&xs, spec.family).unwrap();
        let sd = spec.effective_sd().unwrap();
        // location errors are judged against the spread for zero-mean specs
        let scale = spec.mean.abs().max(sd);
        assert!((fit.mean - spec.mean).abs() < 0.02 * scale, "{spec:?} mean {}", fit.mean);
        let (_, s) = mean_sd(&xs);
        assert!((s - sd).abs() < 0.02 * sd, "{spec:?} sd {s}");
    }
}

#[test]
fn beta_draw_example() {
    let spec = DistSpec::beta(0.5, 0.1);
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let xs: Vec<f64> = (0..100_000).map(|_| spec.draw(&mut rng).unwrap()).collect();
    let (m, s) = mean_sd(&xs);
    assert!((m - 0.5).abs() < 0.01);
    assert!((s - 0.1).abs() < 0.01);
}

fn valid_spec() -> impl Strategy<Value = DistSpec> {
    prop_oneof![
        (-1e4..1e4f64, 1e-3..1e3f64).prop_map(|(m, s)| DistSpec::normal(m, s)),
        (1e-3..1e5f64, 0.01..3.0f64).prop_map(|(m, cv)| DistSpec::gamma(m, m * cv)),
        (0.01..0.99f64, 0.01..0.99f64).prop_map(|(m, f)| DistSpec::beta(m, f * (m * (1.0 - m)).sqrt())),
        (1e-3..1e4f64).prop_map(DistSpec::rayleigh),
    ]
}

/// Shapes whose draws cannot underflow to the edge of the support.
fn drawable_spec() -> impl Strategy<Value = DistSpec> {
    prop_oneof![
        (-1e4..1e4f64, 1e-3..1e3f64).prop_map(|(m, s)| DistSpec::normal(m, s)),
        (1e-3..1e5f64, 0.01..1.5f64).prop_map(|(m, cv)| DistSpec::gamma(m, m * cv)),
        (0.05..0.95f64, 0.01..0.6f64).prop_map(|(m, f)| DistSpec::beta(m, f * (m * (1.0 - m)).sqrt())),
        (1e-3..1e4f64).prop_map(DistSpec::rayleigh),
    ]
}

fn rel_close(a: f64, b: f64) -> bool {
    (a - b).abs() <= 1e-10 * b.abs().max(1.0)
}

proptest! {
    #[test]
    fn moments_round_trip(spec in valid_spec()) {
        let native = spec.native_params().unwrap();
        let (mean, sd) = native.moments();
        prop_assert!(rel_close(mean, spec.mean), "{spec:?} -> {native:?} mean {mean}");
        if !matches!(native, NativeParams::Rayleigh { .. }) {
            prop_assert!(rel_close(sd, spec.sd), "{spec:?} -> {native:?} sd {sd}");
        }
    }

    #[test]
    fn log_pdf_is_finite_inside_and_neg_inf_outside(spec in valid_spec(), u in 0.001..0.999f64) {
        let (lo, hi) = match spec.family {
            Family::Beta => (0.0, 1.0),
            Family::Normal => (spec.mean - 5.0 * spec.sd, spec.mean + 5.0 * spec.sd),
            _ => (0.0, spec.mean * 3.0),
        };
        let x = lo + u * (hi - lo);
        let v = spec.log_pdf(x).unwrap();
        prop_assert!(v.is_finite(), "{spec:?} at {x}: {v}");
        if spec.family != Family::Normal {
            prop_assert_eq!(spec.log_pdf(-1.0).unwrap(), f64::NEG_INFINITY);
        }
        if spec.family == Family::Beta {
            prop_assert_eq!(spec.log_pdf(1.5).unwrap(), f64::NEG_INFINITY);
        }
    }

    #[test]
    fn draws_are_reproducible_and_in_support(spec in drawable_spec(), seed in any::<u64>()) {
        let a = spec.draw(&mut ChaCha8Rng::seed_from_u64(seed)).unwrap();
        let b = spec.draw(&mut ChaCha8Rng::seed_from_u64(seed)).unwrap();
        prop_assert_eq!(a.to_bits(), b.to_bits());
        prop_assert!(spec.family.in_support(a));
    }
}
