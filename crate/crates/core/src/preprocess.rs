//! Decorrelation of dense measurement series.
//!
//! Long, densely sampled channels (1 s acceleration over a 30 min trip) are
//! strongly autocorrelated. The normalized autocorrelation is
//!
//! ```text
//! A(lag) = mean_s[(y_s − μ)(y_{s+lag} − μ)] / σ²
//! ```
//!
//! with μ and σ² the mean and population variance of the whole series and the
//! lagged mean taken over the `n − lag` available pairs. Samples closer than
//! the first lag where `A` drops below a threshold (0.2 by default) are
//! treated as correlated and replaced by their block mean.

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub const DEFAULT_DECORRELATION_THRESHOLD: f64 = 0.2;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum PreprocessError {
    #[error("series is constant (zero variance)")]
    DegenerateSeries,
    #[error("lag {lag} out of range for series of length {len}")]
    LagOutOfRange { lag: usize, len: usize },
    #[error("series needs at least 2 samples, got {0}")]
    TooShort(usize),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TimeSeries {
    pub values: Vec<f64>,
    /// Seconds between consecutive samples.
    pub sample_period: f64,
}

impl TimeSeries {
    pub fn new(values: Vec<f64>, sample_period: f64) -> Self {
        Self { values, sample_period }
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn mean(&self) -> f64 {
        self.values.iter().sum::<f64>() / self.values.len() as f64
    }

    pub fn duration_s(&self) -> f64 {
        self.values.len() as f64 * self.sample_period
    }
}

/// Mean and population variance of the series.
fn moments(values: &[f64]) -> (f64, f64) {
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let var = values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n;
    (mean, var)
}

fn check_variance(values: &[f64]) -> Result<(f64, f64), PreprocessError> {
    if values.len() < 2 {
        return Err(PreprocessError::TooShort(values.len()));
    }
    let (mean, var) = moments(values);
    // relative test so that large-offset constant series are caught too
    if var <= f64::EPSILON * mean.abs().max(1.0).powi(2) {
        return Err(PreprocessError::DegenerateSeries);
    }
    Ok((mean, var))
}

fn acf_at(values: &[f64], mean: f64, var: f64, lag: usize) -> f64 {
    let pairs = values.len() - lag;
    let cov: f64 = values[..pairs]
        .iter()
        .zip(&values[lag..])
        .map(|(a, b)| (a - mean) * (b - mean))
        .sum();
    cov / pairs as f64 / var
}

pub fn autocorrelation(series: &TimeSeries, lag: usize) -> Result<f64, PreprocessError> {
    let values = &series.values;
    if lag >= values.len() {
        return Err(PreprocessError::LagOutOfRange { lag, len: values.len() });
    }
    let (mean, var) = check_variance(values)?;
    Ok(acf_at(values, mean, var, lag))
}

/// Smallest lag ≥ 1 whose autocorrelation is below `threshold`, or the series
/// length when no lag qualifies.
pub fn decorrelation_lag(series: &TimeSeries, threshold: f64) -> Result<usize, PreprocessError> {
    let values = &series.values;
    let (mean, var) = check_variance(values)?;
    Ok((1..values.len())
        .find(|&lag| acf_at(values, mean, var, lag) < threshold)
        .unwrap_or(values.len()))
}

/// Non-overlapping block means; a trailing partial block is averaged as-is.
pub fn block_average(series: &TimeSeries, factor: usize) -> TimeSeries {
    let factor = factor.max(1);
    let values = series
        .values
        .chunks(factor)
        .map(|c| c.iter().sum::<f64>() / c.len() as f64)
        .collect();
    TimeSeries { values, sample_period: series.sample_period * factor as f64 }
}

/// Reduces a series by its own decorrelation lag. Series that are too short
/// or constant carry no autocorrelation structure and are returned unchanged.
pub fn reduce(series: &TimeSeries, threshold: f64) -> (TimeSeries, usize) {
    match decorrelation_lag(series, threshold) {
        Ok(lag) => (block_average(series, lag), lag),
        Err(_) => (series.clone(), 1),
    }
}

/// Reduces a paired acceleration/velocity channel using the acceleration lag
/// for both so the two stay aligned sample-for-sample.
pub fn reduce_paired(
    accel: &TimeSeries,
    velocity: &TimeSeries,
    threshold: f64,
) -> (TimeSeries, TimeSeries, usize) {
    let (a, lag) = reduce(accel, threshold);
    (a, block_average(velocity, lag), lag)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ts(values: Vec<f64>) -> TimeSeries {
        TimeSeries::new(values, 1.0)
    }

    #[test]
    fn lag_zero_is_one() {
        let s = ts(vec![1.0, 3.0, 2.0, 5.0, 4.0]);
        assert!((autocorrelation(&s, 0).unwrap() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn alternating_series_is_anticorrelated() {
        let s = ts((0..100).map(|i| if i % 2 == 0 { 1.0 } else { -1.0 }).collect());
        assert!((autocorrelation(&s, 1).unwrap() + 1.0).abs() < 1e-12);
    }

    #[test]
    fn degenerate_and_range_errors() {
        assert_eq!(autocorrelation(&ts(vec![2.0; 10]), 1), Err(PreprocessError::DegenerateSeries));
        assert_eq!(
            autocorrelation(&ts(vec![1.0, 2.0]), 2),
            Err(PreprocessError::LagOutOfRange { lag: 2, len: 2 })
        );
        assert_eq!(decorrelation_lag(&ts(vec![3.0; 5]), 0.2), Err(PreprocessError::DegenerateSeries));
    }

    #[test]
    fn block_average_examples() {
        let s = ts(vec![1.0, 2.0, 3.0, 4.0, 5.0, 6.0]);
        assert_eq!(block_average(&s, 1), s);
        assert_eq!(block_average(&s, 3).values, vec![2.0, 5.0]);
        assert_eq!(block_average(&s, 3).sample_period, 3.0);
        let s = ts(vec![1.0, 2.0, 3.0, 4.0, 5.0]);
        assert_eq!(block_average(&s, 2).values, vec![1.5, 3.5, 5.0]);
    }

    #[test]
    fn threshold_above_one_returns_one() {
        let s = ts(vec![0.0, 1.0, 2.0, 3.0, 4.0, 5.0]);
        assert_eq!(decorrelation_lag(&s, 1.01).unwrap(), 1);
    }

    #[test]
    fn constant_series_passes_through_reduce() {
        let s = ts(vec![298.15, 298.15]);
        let (r, lag) = reduce(&s, 0.2);
        assert_eq!(r, s);
        assert_eq!(lag, 1);
    }
}
