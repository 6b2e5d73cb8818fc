//! Summaries of sampled chains and goodness-of-fit metrics.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::dist::{DistSpec, Family};
use crate::preprocess::{autocorrelation, TimeSeries};
use crate::sampler::Chain;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum PosteriorError {
    #[error("need at least {needed} samples, got {got}")]
    TooFewSamples { needed: usize, got: usize },
    #[error("credible level must lie in (0, 1), got {0}")]
    InvalidLevel(f64),
    #[error("predicted and measured lengths differ ({0} vs {1})")]
    LengthMismatch(usize, usize),
    #[error("measured values have zero variance")]
    DegenerateData,
    #[error("sample {value} lies outside the {family} support")]
    SupportViolation { family: Family, value: f64 },
    #[error("fitted moments are invalid for the {0} family")]
    InvalidFit(Family),
}

/// Sample mean and sd (n − 1 denominator).
pub fn mean_sd(samples: &[f64]) -> (f64, f64) {
    let n = samples.len() as f64;
    let mean = samples.iter().sum::<f64>() / n;
    if samples.len() < 2 {
        return (mean, 0.0);
    }
    let var = samples.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / (n - 1.0);
    (mean, var.sqrt())
}

pub const MIN_FIT_SAMPLES: usize = 10;

/// Method-of-moments fit of the family to the samples.
pub fn fit_moments(samples: &[f64], family: Family) -> Result<DistSpec, PosteriorError> {
    if samples.len() < MIN_FIT_SAMPLES {
        return Err(PosteriorError::TooFewSamples { needed: MIN_FIT_SAMPLES, got: samples.len() });
    }
    if let Some(&value) = samples.iter().find(|x| !family.in_support(**x)) {
        return Err(PosteriorError::SupportViolation { family, value });
    }
    let (mean, sd) = mean_sd(samples);
    let spec = match family {
        Family::Rayleigh => DistSpec::rayleigh(mean),
        _ => DistSpec { family, mean, sd },
    };
    spec.native_params().map_err(|_| PosteriorError::InvalidFit(family))?;
    Ok(spec)
}

/// Fit to the post-burn-in part of a chain.
pub fn fit_family(chain: &Chain, family: Family) -> Result<DistSpec, PosteriorError> {
    fit_moments(chain.post_burn_in(), family)
}

/// Linear-interpolated empirical quantile of sorted data.
fn quantile_sorted(sorted: &[f64], p: f64) -> f64 {
    let pos = p * (sorted.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    let w = pos - lo as f64;
    sorted[lo] * (1.0 - w) + sorted[hi] * w
}

/// Central empirical credible interval.
pub fn credible_interval(samples: &[f64], level: f64) -> Result<(f64, f64), PosteriorError> {
    if !(level > 0.0 && level < 1.0) {
        return Err(PosteriorError::InvalidLevel(level));
    }
    if samples.is_empty() {
        return Err(PosteriorError::TooFewSamples { needed: 1, got: 0 });
    }
    let mut sorted = samples.to_vec();
    sorted.sort_by(f64::total_cmp);
    let tail = 0.5 * (1.0 - level);
    Ok((quantile_sorted(&sorted, tail), quantile_sorted(&sorted, 1.0 - tail)))
}

/// Effective sample size with Geyer's initial positive sequence truncation.
pub fn effective_sample_size(samples: &[f64]) -> f64 {
    let n = samples.len();
    let series = TimeSeries::new(samples.to_vec(), 1.0);
    if n < 4 || autocorrelation(&series, 0).is_err() {
        return n as f64;
    }
    let mut sum = 0.0;
    let mut lag = 1;
    while lag + 1 < n {
        let pair = autocorrelation(&series, lag).unwrap_or(0.0)
            + autocorrelation(&series, lag + 1).unwrap_or(0.0);
        if pair <= 0.0 {
            break;
        }
        sum += pair;
        lag += 2;
    }
    let tau = 1.0 + 2.0 * sum;
    (n as f64 / tau).clamp(1.0, n as f64)
}

/// Split-half heuristic: the means of the two halves agree within three
/// combined standard errors (each corrected for autocorrelation).
pub fn looks_stationary(samples: &[f64]) -> bool {
    if samples.len() < 8 {
        return true;
    }
    let (a, b) = samples.split_at(samples.len() / 2);
    let (ma, sa) = mean_sd(a);
    let (mb, sb) = mean_sd(b);
    let se = (sa * sa / effective_sample_size(a) + sb * sb / effective_sample_size(b)).sqrt();
    (ma - mb).abs() <= 3.0 * se.max(f64::EPSILON * ma.abs().max(1.0))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PosteriorSummary {
    pub variable: String,
    pub family: Family,
    pub mean: f64,
    pub sd: f64,
    pub ci_low: f64,
    pub ci_high: f64,
    pub ess: f64,
    pub acceptance: f64,
    /// Moment fit in the declared family; absent for degenerate chains.
    pub fitted: Option<DistSpec>,
}

impl PosteriorSummary {
    pub fn contains(&self, x: f64) -> bool {
        self.ci_low <= x && x <= self.ci_high
    }
}

/// Moments, 95% interval, ESS, acceptance and family fit of the
/// post-burn-in samples.
pub fn summarize(chain: &Chain) -> Result<PosteriorSummary, PosteriorError> {
    let post = chain.post_burn_in();
    if post.len() < MIN_FIT_SAMPLES {
        return Err(PosteriorError::TooFewSamples { needed: MIN_FIT_SAMPLES, got: post.len() });
    }
    let (mean, sd) = mean_sd(post);
    let (ci_low, ci_high) = credible_interval(post, 0.95)?;
    Ok(PosteriorSummary {
        variable: chain.variable.clone(),
        family: chain.family,
        mean,
        sd,
        ci_low,
        ci_high,
        ess: effective_sample_size(post),
        acceptance: chain.accepted as f64 / chain.samples.len().max(1) as f64,
        fitted: fit_moments(post, chain.family).ok(),
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FitMetrics {
    pub r2: f64,
    /// Root-mean-square deviation as a percentage of the mean measurement.
    pub rmsd_pct: f64,
    pub n: usize,
}

/// `R² = 1 − SS_res/SS_tot` and RMSD relative to the measured mean.
pub fn metrics(predicted: &[f64], measured: &[f64]) -> Result<FitMetrics, PosteriorError> {
    if predicted.len() != measured.len() {
        return Err(PosteriorError::LengthMismatch(predicted.len(), measured.len()));
    }
    if measured.len() < 2 {
        return Err(PosteriorError::TooFewSamples { needed: 2, got: measured.len() });
    }
    let n = measured.len() as f64;
    let mean = measured.iter().sum::<f64>() / n;
    let ss_tot: f64 = measured.iter().map(|m| (m - mean).powi(2)).sum();
    if ss_tot == 0.0 {
        return Err(PosteriorError::DegenerateData);
    }
    let ss_res: f64 = predicted.iter().zip(measured).map(|(p, m)| (p - m).powi(2)).sum();
    Ok(FitMetrics {
        r2: 1.0 - ss_res / ss_tot,
        rmsd_pct: (ss_res / n).sqrt() / mean * 100.0,
        n: measured.len(),
    })
}

/// Density of the fitted spec on `points` evenly spaced abscissae spanning
/// mean ± 4 sd, clipped to the family's support.
pub fn pdf_curve(spec: &DistSpec, points: usize) -> Vec<(f64, f64)> {
    let Ok(native) = spec.native_params() else {
        return Vec::new();
    };
    let (mean, sd) = native.moments();
    let (mut lo, mut hi) = (mean - 4.0 * sd, mean + 4.0 * sd);
    match spec.family {
        Family::Normal => {}
        // open supports: stay strictly inside so every density is finite
        Family::Gamma | Family::Rayleigh => lo = lo.max(1e-9 * hi),
        Family::Beta => {
            lo = lo.max(1e-9);
            hi = hi.min(1.0 - 1e-9);
        }
    }
    let points = points.max(2);
    (0..points)
        .map(|i| {
            let x = lo + (hi - lo) * i as f64 / (points - 1) as f64;
            (x, crate::dist::log_pdf_native(&native, x).exp())
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn perfect_fit() {
        let m = [1.0, 2.0, 3.0, 4.0];
        let f = metrics(&m, &m).unwrap();
        assert_eq!(f.r2, 1.0);
        assert_eq!(f.rmsd_pct, 0.0);
    }

    #[test]
    fn mean_predictor_has_zero_r2() {
        let m = [1.0, 2.0, 3.0, 4.0];
        let f = metrics(&[2.5; 4], &m).unwrap();
        assert!(f.r2.abs() < 1e-15);
        // rms residual sqrt(1.25) over mean 2.5
        assert!((f.rmsd_pct - 1.25f64.sqrt() / 2.5 * 100.0).abs() < 1e-12);
    }

    #[test]
    fn fit_errors() {
        assert!(matches!(metrics(&[1.0], &[1.0, 2.0]), Err(PosteriorError::LengthMismatch(1, 2))));
        assert_eq!(metrics(&[1.0, 2.0], &[3.0, 3.0]), Err(PosteriorError::DegenerateData));
    }

    #[test]
    fn interval_of_uniform_grid() {
        let xs: Vec<f64> = (0..=1000).map(|i| i as f64 / 1000.0).collect();
        let (lo, hi) = credible_interval(&xs, 0.95).unwrap();
        assert!((lo - 0.025).abs() < 1e-12);
        assert!((hi - 0.975).abs() < 1e-12);
        assert!(credible_interval(&xs, 1.0).is_err());
    }

    #[test]
    fn ess_of_independent_and_sticky_series() {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(1);
        let iid: Vec<f64> = (0..4000).map(|_| rng.gen::<f64>()).collect();
        let ess = effective_sample_size(&iid);
        assert!(ess > 3000.0, "{ess}");
        let sticky: Vec<f64> = iid.iter().map(|x| (x * 40.0).floor()).collect::<Vec<_>>();
        let mut ar = vec![0.0; 4000];
        for i in 1..4000 {
            ar[i] = 0.95 * ar[i - 1] + sticky[i] / 40.0 - 0.5;
        }
        assert!(effective_sample_size(&ar) < 400.0);
    }

    #[test]
    fn hand_computed_metrics() {
        let f = metrics(&[11.0, 19.0], &[10.0, 20.0]).unwrap();
        assert!((f.r2 - 0.96).abs() < 1e-12);
        assert!((f.rmsd_pct - 100.0 / 15.0).abs() < 1e-12);
    }

    #[test]
    fn fit_rejections() {
        assert!(matches!(fit_moments(&[5.0; 100], Family::Gamma), Err(PosteriorError::InvalidFit(_))));
        let mut xs = vec![1.0; 20];
        xs[3] = -0.5;
        xs[4] = 2.0;
        assert!(matches!(fit_moments(&xs, Family::Gamma), Err(PosteriorError::SupportViolation { .. })));
        assert!(matches!(fit_moments(&[1.0, 2.0], Family::Normal), Err(PosteriorError::TooFewSamples { .. })));
    }

    #[test]
    fn normal_pdf_curve_grid() {
        let curve = pdf_curve(&DistSpec::normal(0.0, 1.0), 5);
        let xs: Vec<f64> = curve.iter().map(|p| p.0).collect();
        assert_eq!(xs, vec![-4.0, -2.0, 0.0, 2.0, 4.0]);
        assert!((curve[2].1 - 0.398_942_280_401_432_7).abs() < 1e-12);
        let g = pdf_curve(&DistSpec::gamma(1.0, 1.0), 10);
        assert!(g[0].0 > 0.0);
    }

    #[test]
    fn pdf_curve_beta_is_clipped() {
        let curve = pdf_curve(&DistSpec::beta(0.9, 0.05), 50);
        assert_eq!(curve.len(), 50);
        assert!(curve.iter().all(|(x, _)| (0.0..=1.0).contains(x)));
        assert!(curve.iter().all(|(_, d)| d.is_finite() && *d >= 0.0));
    }
}
