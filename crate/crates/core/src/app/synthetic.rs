//! Synthetic stand-ins for unavailable measurement data.
//!
//! The cycling dataset follows the fade law exactly at known parameters with
//! Gaussian measurement noise on each replicate, under the three cell test
//! conditions of the A123 LFP cycling campaign. Drive cycles are stop-and-go
//! micro-trips whose acceleration and cruise speed scale with an
//! aggressiveness knob. Grid-service profiles and climates are simple
//! parametric shapes.

use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use super::io::{FadePoint, TrainingRecord};
use crate::model::{fade_mean, ParameterSet, GAS_CONSTANT};
use crate::preprocess::TimeSeries;

/// Fade-law parameters used to generate the bundled dataset.
pub fn true_parameters() -> ParameterSet {
    ParameterSet {
        alpha: 10_000.0,
        beta: 20_000.0,
        activation_energy: 30_500.0,
        eta: 150.0,
        zeta: 0.55,
        epsilon: 0.0,
        k: [0.0, 0.0, 1.0, 0.0, 0.0, 0.0, 0.0],
        mass: 1280.0,
        aero: 0.3675,
        rolling: 125.568,
    }
}

/// A cell test condition with its Ah checkpoints.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CellCondition {
    pub cell_id: String,
    pub temp_c: f64,
    pub c_rate: f64,
    pub soc_avg: f64,
    pub soc_max: f64,
    pub soc_min: f64,
    pub ah: Vec<f64>,
}

fn grid(step: f64, count: usize) -> Vec<f64> {
    (1..=count).map(|i| step * i as f64).collect()
}

/// The three test conditions (°C, C-rate, SOC %) with 14/14/13 checkpoints.
pub fn reference_cells() -> Vec<CellCondition> {
    vec![
        CellCondition {
            cell_id: "A".into(),
            temp_c: 35.0,
            c_rate: 2.82,
            soc_avg: 38.5,
            soc_max: 50.0,
            soc_min: 22.6,
            ah: grid(250.0, 14),
        },
        CellCondition {
            cell_id: "B".into(),
            temp_c: 23.0,
            c_rate: 3.0,
            soc_avg: 41.9,
            soc_max: 54.0,
            soc_min: 32.5,
            ah: grid(300.0, 14),
        },
        CellCondition {
            cell_id: "C".into(),
            temp_c: 23.0,
            c_rate: 3.49,
            soc_avg: 53.4,
            soc_max: 100.0,
            soc_min: 11.4,
            ah: grid(300.0, 13),
        },
    ]
}

/// Noise-free fade of a condition at `ah`.
pub fn condition_fade(params: &ParameterSet, cell: &CellCondition, ah: f64) -> f64 {
    fade_mean(
        params,
        cell.soc_avg / 100.0,
        cell.c_rate,
        cell.temp_c + 273.15,
        ah,
        GAS_CONSTANT,
    )
    .unwrap_or(0.0)
}

/// Replicated noisy fade measurements, clipped to [0, 100].
pub fn cycling_dataset(
    params: &ParameterSet,
    cells: &[CellCondition],
    replicates: usize,
    noise_sd: f64,
    seed: u64,
) -> Vec<TrainingRecord> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let noise = Normal::new(0.0, noise_sd.max(f64::MIN_POSITIVE)).expect("valid normal");
    cells
        .iter()
        .map(|cell| TrainingRecord {
            cell_id: cell.cell_id.clone(),
            temp_c: cell.temp_c,
            c_rate: cell.c_rate,
            soc_avg: cell.soc_avg,
            soc_min: cell.soc_min,
            soc_max: cell.soc_max,
            points: cell
                .ah
                .iter()
                .map(|&ah| {
                    let f = condition_fade(params, cell, ah);
                    FadePoint {
                        ah,
                        fade_pct: (0..replicates)
                            .map(|_| (f + noise.sample(&mut rng)).clamp(0.0, 100.0))
                            .collect(),
                    }
                })
                .collect(),
        })
        .collect()
}

/// Stop-and-go drive cycle shape.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DriveCycleParams {
    pub duration_s: usize,
    /// Mean cruise speed of a micro-trip (m/s).
    pub cruise_speed: f64,
    /// 0 = gentle, 1 = aggressive.
    pub aggressiveness: f64,
    pub seed: u64,
}

impl DriveCycleParams {
    fn accel(&self) -> f64 {
        0.6 + 1.6 * self.aggressiveness
    }

    fn speed_scale(&self) -> f64 {
        0.85 + 0.3 * self.aggressiveness
    }
}

/// Velocity trace at 1 s: micro-trips that accelerate to a cruise speed,
/// hold it, brake to a stop and idle. The trace starts and ends at rest.
pub fn drive_cycle(p: &DriveCycleParams) -> TimeSeries {
    let mut rng = ChaCha8Rng::seed_from_u64(p.seed);
    let accel = p.accel();
    let decel = 0.9 * accel;
    let mut v: Vec<f64> = Vec::with_capacity(p.duration_s);
    loop {
        let cruise = p.cruise_speed * p.speed_scale() * rng.gen_range(0.7..1.3);
        let hold = rng.gen_range(15..60);
        let idle = rng.gen_range(8..30);
        let mut trip = Vec::new();
        let mut speed = 0.0;
        while speed < cruise {
            speed = (speed + accel).min(cruise);
            trip.push(speed);
        }
        trip.extend(std::iter::repeat(cruise).take(hold));
        while speed > 0.0 {
            speed = (speed - decel).max(0.0);
            trip.push(speed);
        }
        trip.extend(std::iter::repeat(0.0).take(idle));
        if v.len() + trip.len() > p.duration_s {
            break;
        }
        v.extend(trip);
    }
    v.resize(p.duration_s, 0.0);
    TimeSeries::new(v, 1.0)
}

/// Mean absolute acceleration, the driver-style label.
pub fn mean_abs_accel(velocity: &TimeSeries) -> f64 {
    let v = &velocity.values;
    let n = v.len().saturating_sub(1).max(1);
    v.windows(2).map(|w| (w[1] - w[0]).abs() / velocity.sample_period).sum::<f64>() / n as f64
}

/// Half-sine absorption of solar generation (charging, so negative).
pub fn solar_profile(peak_w: f64, duration_h: f64, step_s: f64) -> TimeSeries {
    let n = ((duration_h * 3600.0) / step_s).round().max(1.0) as usize;
    let values = (0..n)
        .map(|i| -peak_w * (std::f64::consts::PI * (i as f64 + 0.5) / n as f64).sin())
        .collect();
    TimeSeries::new(values, step_s)
}

/// Zero-mean regulation signal: paired up/down half-steps of random amplitude
/// around `mean_abs_w`.
pub fn freq_regulation_profile(mean_abs_w: f64, duration_h: f64, step_s: f64, seed: u64) -> TimeSeries {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let pairs = (((duration_h * 3600.0) / step_s / 2.0).round() as usize).max(1);
    let mut values = Vec::with_capacity(2 * pairs);
    let mut amps: Vec<f64> = (0..pairs).map(|_| rng.gen_range(0.5..1.5)).collect();
    let mean: f64 = amps.iter().sum::<f64>() / pairs as f64;
    for a in &mut amps {
        *a *= mean_abs_w / mean;
    }
    for (i, a) in amps.iter().enumerate() {
        let sign = if i % 2 == 0 { 1.0 } else { -1.0 };
        values.push(sign * a);
        values.push(-sign * a);
    }
    TimeSeries::new(values, step_s)
}

/// Daily mean temperatures (°C) with a sinusoidal seasonal swing.
pub fn climate_series(mean_c: f64, amplitude_c: f64, days: usize) -> TimeSeries {
    let values = (0..days)
        .map(|d| mean_c - amplitude_c * (2.0 * std::f64::consts::PI * d as f64 / 365.0).cos())
        .collect();
    TimeSeries::new(values, 86_400.0)
}
