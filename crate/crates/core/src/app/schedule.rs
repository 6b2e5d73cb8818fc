//! Schedule files (TOML).
//!
//! ```toml
//! [vehicle]            # optional, defaults to a 1200 kg compact
//! mass = 1200.0
//! passenger_mass = 80.0
//! cx = 0.3
//! af = 2.0
//! fr = 0.01
//!
//! [pack]               # optional overrides of the pack/SOC/charger defaults
//! cells = 1740
//! soc_min = 0.1
//!
//! [[driving]]
//! velocity = "../drive/commute_am.csv"   # t_s,value in m/s
//!
//! [[charging]]
//! charger = "l2"
//! duration_h = 1.0     # power_w defaults to the charger rating
//!
//! [solar]
//! profile = "../profiles/solar.csv"      # t_s,value in pack W, positive discharges
//! repeat = "daily"
//!
//! [peak_shaving]
//! power_w = 6600.0     # inline constant profile
//! duration_h = 0.37
//! repeat = "weekly"
//! ```
//!
//! Relative paths resolve against the schedule file's directory.

use std::path::{Path, PathBuf};

use serde::Deserialize;

use super::config::ServiceOverrides;
use super::io::load_time_series;
use super::AppError;
use crate::scenario::{
    Charger, ChargingEvent, DailyTaskSchedule, DrivingSession, RepeatFrequency, ScenarioConfig,
    ServiceProfile, VehicleSpec,
};

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct DrivingEntry {
    velocity: PathBuf,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct ChargingEntry {
    charger: Charger,
    power_w: Option<f64>,
    duration_h: f64,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct ServiceEntry {
    profile: Option<PathBuf>,
    power_w: Option<f64>,
    duration_h: Option<f64>,
    #[serde(default)]
    repeat: RepeatFrequency,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct ScheduleFile {
    vehicle: Option<VehicleSpec>,
    #[serde(default)]
    pack: ScenarioConfig,
    #[serde(default)]
    driving: Vec<DrivingEntry>,
    #[serde(default)]
    charging: Vec<ChargingEntry>,
    solar: Option<ServiceEntry>,
    freq_regulation: Option<ServiceEntry>,
    peak_shaving: Option<ServiceEntry>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LoadedSchedule {
    pub schedule: DailyTaskSchedule,
    pub vehicle: VehicleSpec,
    pub pack: ScenarioConfig,
}

impl LoadedSchedule {
    pub fn with_overrides(mut self, o: &ServiceOverrides) -> Self {
        let apply = |slot: &mut Option<ServiceProfile>, repeat: Option<RepeatFrequency>| {
            if let (Some(p), Some(r)) = (slot.as_mut(), repeat) {
                p.repeat = r;
            }
        };
        apply(&mut self.schedule.solar, o.solar);
        apply(&mut self.schedule.freq_regulation, o.freq_regulation);
        apply(&mut self.schedule.peak_shaving, o.peak_shaving);
        self
    }
}

fn service(entry: Option<ServiceEntry>, name: &str, base: &Path) -> Result<Option<ServiceProfile>, AppError> {
    let Some(e) = entry else { return Ok(None) };
    let power = match (e.profile, e.power_w, e.duration_h) {
        (Some(p), None, None) => load_time_series(&base.join(p))?,
        (None, Some(w), Some(h)) => ServiceProfile::constant(w, h, e.repeat).power,
        _ => {
            return Err(AppError::Config(format!(
                "[{name}] needs either `profile` or both `power_w` and `duration_h`"
            )))
        }
    };
    Ok(Some(ServiceProfile { power, repeat: e.repeat }))
}

pub fn load_schedule(path: &Path) -> Result<LoadedSchedule, AppError> {
    let text = std::fs::read_to_string(path).map_err(|e| AppError::io(path, e))?;
    let file: ScheduleFile =
        toml::from_str(&text).map_err(|e| AppError::Config(format!("{}: {e}", path.display())))?;
    let base = path.parent().unwrap_or(Path::new("."));
    let driving_sessions = file
        .driving
        .iter()
        .map(|d| load_time_series(&base.join(&d.velocity)).map(DrivingSession::from_velocity))
        .collect::<Result<Vec<_>, _>>()?;
    let charging_events = file
        .charging
        .iter()
        .map(|c| ChargingEvent {
            charger: c.charger,
            power_w: c.power_w.unwrap_or_else(|| file.pack.chargers.rating(c.charger)),
            duration_h: c.duration_h,
        })
        .collect();
    let schedule = DailyTaskSchedule {
        driving_sessions,
        charging_events,
        solar: service(file.solar, "solar", base)?,
        freq_regulation: service(file.freq_regulation, "freq_regulation", base)?,
        peak_shaving: service(file.peak_shaving, "peak_shaving", base)?,
    };
    schedule.validate()?;
    let vehicle = file.vehicle.unwrap_or_default();
    vehicle.validate()?;
    file.pack.validate()?;
    Ok(LoadedSchedule { schedule, vehicle, pack: file.pack })
}
