//! Daily duty composition: driving, charging and grid services.
//!
//! A [`DailyTaskSchedule`] is played forward day by day on a pack made of
//! identical cells. Every step is converted to a cell C-rate and coulomb
//! counted inside the SOC window. Each day starts at the initial SOC; the
//! day's deficit is recharged at the end of the day with a charger picked
//! from the configured event mix, and an L2 recharge is inserted mid-day
//! whenever a discharge would cross the SOC floor.
//!
//! Power sign convention: positive pack power discharges the battery.
//!
//! Task slots inside a day (hours after the day starts, a task starts at its
//! slot or as soon as the previous one finished): first drive 0, solar 4,
//! frequency regulation 7, second drive 10, peak shaving 12, further drives
//! 13, explicit charging events 14, end-of-day recharge 15.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::model::{
    deterministic_latents, Duty, DutyCycle, DutyStep, GridPowers, ModelConfig, ModelError,
    Observation, ObservationSet, ParameterSet, TASK_COUNT,
};
use crate::preprocess::{reduce_paired, TimeSeries, DEFAULT_DECORRELATION_THRESHOLD};

pub const GRAVITY: f64 = 9.81;
pub const AIR_DENSITY: f64 = 1.225;
const HOURS_PER_DAY: f64 = 24.0;
const EPS_SOC: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ScenarioError {
    #[error("schedule has no tasks")]
    EmptySchedule,
    #[error("invalid duration for {0}: durations must be positive")]
    InvalidDuration(String),
    #[error("incomplete vehicle spec: {0}")]
    IncompleteSpec(String),
    #[error("schedule infeasible on day {day}: tasks and recharging need {hours:.2} h")]
    ScheduleInfeasible { day: usize, hours: f64 },
    #[error("profile has no charge throughput")]
    NoThroughput,
    #[error("at least one location is required")]
    NoLocations,
    #[error("invalid scenario configuration: {0}")]
    InvalidConfig(String),
    #[error(transparent)]
    Model(#[from] ModelError),
}

// ---------------------------------------------------------------------------
// Vehicle
// ---------------------------------------------------------------------------

fn default_rho() -> f64 {
    AIR_DENSITY
}

fn default_gravity() -> f64 {
    GRAVITY
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct VehicleSpec {
    /// Curb mass (kg).
    pub mass: f64,
    pub passenger_mass: f64,
    /// Aerodynamic drag coefficient.
    pub cx: f64,
    /// Frontal area (m²).
    pub af: f64,
    /// Rolling resistance coefficient.
    pub fr: f64,
    #[serde(default = "default_rho")]
    pub rho: f64,
    /// Road grade (rad).
    #[serde(default)]
    pub grade_theta: f64,
    #[serde(default = "default_gravity")]
    pub gravity: f64,
}

impl Default for VehicleSpec {
    fn default() -> Self {
        Self {
            mass: 1200.0,
            passenger_mass: 80.0,
            cx: 0.3,
            af: 2.0,
            fr: 0.01,
            rho: AIR_DENSITY,
            grade_theta: 0.0,
            gravity: GRAVITY,
        }
    }
}

impl VehicleSpec {
    pub fn validate(&self) -> Result<(), ScenarioError> {
        let fields = [
            ("mass", self.mass),
            ("passenger_mass", self.passenger_mass),
            ("cx", self.cx),
            ("af", self.af),
            ("fr", self.fr),
            ("rho", self.rho),
            ("gravity", self.gravity),
        ];
        for (name, value) in fields {
            if !(value.is_finite() && value > 0.0) {
                return Err(ScenarioError::IncompleteSpec(format!("{name} must be positive, got {value}")));
            }
        }
        if !self.grade_theta.is_finite() {
            return Err(ScenarioError::IncompleteSpec("grade_theta must be finite".into()));
        }
        Ok(())
    }

    pub fn total_mass(&self) -> f64 {
        self.mass + self.passenger_mass
    }

    pub fn aero_coefficient(&self) -> f64 {
        aero_coefficient(self)
    }

    pub fn rolling_force(&self) -> f64 {
        rolling_grade_coefficient(self)
    }

    /// Wheel power for one acceleration/velocity sample.
    pub fn wheel_power(&self, a: f64, v: f64) -> f64 {
        self.total_mass() * a * v + self.aero_coefficient() * v.powi(3) + self.rolling_force() * v
    }
}

/// `ω = ½·ρ·Cx·Af`
pub fn aero_coefficient(spec: &VehicleSpec) -> f64 {
    0.5 * spec.rho * spec.cx * spec.af
}

/// `φ = m·g·fr·cos θ + m·g·sin θ` with `m` including passengers.
pub fn rolling_grade_coefficient(spec: &VehicleSpec) -> f64 {
    let mg = spec.total_mass() * spec.gravity;
    mg * spec.fr * spec.grade_theta.cos() + mg * spec.grade_theta.sin()
}

// ---------------------------------------------------------------------------
// Tasks and schedules
// ---------------------------------------------------------------------------

/// The seven daily tasks, in contribution-coefficient order `k1..k7`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Task {
    Driving,
    ChargeL1,
    ChargeL2,
    ChargeL3,
    Solar,
    FreqRegulation,
    PeakShaving,
}

impl Task {
    pub const ALL: [Task; TASK_COUNT] = [
        Task::Driving,
        Task::ChargeL1,
        Task::ChargeL2,
        Task::ChargeL3,
        Task::Solar,
        Task::FreqRegulation,
        Task::PeakShaving,
    ];

    pub fn index(self) -> usize {
        self as usize
    }

    /// Coefficient number `n` of `k_n`.
    pub fn coefficient(self) -> usize {
        self.index() + 1
    }

    pub fn name(self) -> &'static str {
        match self {
            Task::Driving => "driving",
            Task::ChargeL1 => "charge_l1",
            Task::ChargeL2 => "charge_l2",
            Task::ChargeL3 => "charge_l3",
            Task::Solar => "solar",
            Task::FreqRegulation => "freq_regulation",
            Task::PeakShaving => "peak_shaving",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Charger {
    L1,
    L2,
    L3,
}

impl Charger {
    pub const ALL: [Charger; 3] = [Charger::L1, Charger::L2, Charger::L3];

    pub fn task(self) -> Task {
        match self {
            Charger::L1 => Task::ChargeL1,
            Charger::L2 => Task::ChargeL2,
            Charger::L3 => Task::ChargeL3,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RepeatFrequency {
    #[default]
    Daily,
    EveryOtherDay,
    Weekly,
    Monthly,
    Never,
}

impl RepeatFrequency {
    pub fn period_days(self) -> Option<usize> {
        match self {
            RepeatFrequency::Daily => Some(1),
            RepeatFrequency::EveryOtherDay => Some(2),
            RepeatFrequency::Weekly => Some(7),
            RepeatFrequency::Monthly => Some(30),
            RepeatFrequency::Never => None,
        }
    }

    pub fn active_on(self, day: usize) -> bool {
        self.period_days().is_some_and(|p| day % p == 0)
    }
}

/// One trip sampled at a fixed period.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DrivingSession {
    pub velocity: TimeSeries,
    pub accel: TimeSeries,
}

impl DrivingSession {
    /// Derives acceleration by central differences (one-sided at the ends).
    pub fn from_velocity(velocity: TimeSeries) -> Self {
        let v = &velocity.values;
        let dt = velocity.sample_period;
        let n = v.len();
        let accel = (0..n)
            .map(|i| match (i, n) {
                (_, 0 | 1) => 0.0,
                (0, _) => (v[1] - v[0]) / dt,
                (i, n) if i == n - 1 => (v[n - 1] - v[n - 2]) / dt,
                (i, _) => (v[i + 1] - v[i - 1]) / (2.0 * dt),
            })
            .collect();
        Self { accel: TimeSeries::new(accel, dt), velocity }
    }

    pub fn duration_h(&self) -> f64 {
        self.velocity.duration_s() / 3600.0
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ChargingEvent {
    pub charger: Charger,
    /// Pack-level charging power (W).
    pub power_w: f64,
    pub duration_h: f64,
}

/// A grid-service power profile (pack W, positive discharges).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ServiceProfile {
    pub power: TimeSeries,
    pub repeat: RepeatFrequency,
}

impl ServiceProfile {
    pub fn constant(power_w: f64, duration_h: f64, repeat: RepeatFrequency) -> Self {
        Self { power: TimeSeries::new(vec![power_w], duration_h * 3600.0), repeat }
    }

    pub fn duration_h(&self) -> f64 {
        self.power.duration_s() / 3600.0
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct DailyTaskSchedule {
    pub driving_sessions: Vec<DrivingSession>,
    pub charging_events: Vec<ChargingEvent>,
    pub solar: Option<ServiceProfile>,
    pub freq_regulation: Option<ServiceProfile>,
    pub peak_shaving: Option<ServiceProfile>,
}

impl DailyTaskSchedule {
    pub fn validate(&self) -> Result<(), ScenarioError> {
        let services = [
            ("solar", &self.solar),
            ("freq_regulation", &self.freq_regulation),
            ("peak_shaving", &self.peak_shaving),
        ];
        let any = !self.driving_sessions.is_empty()
            || !self.charging_events.is_empty()
            || services.iter().any(|(_, s)| s.is_some());
        if !any {
            return Err(ScenarioError::EmptySchedule);
        }
        for (i, s) in self.driving_sessions.iter().enumerate() {
            if s.velocity.is_empty() || !(s.velocity.sample_period > 0.0) {
                return Err(ScenarioError::InvalidDuration(format!("driving session {i}")));
            }
            if s.velocity.len() != s.accel.len() {
                return Err(ScenarioError::InvalidConfig(format!(
                    "driving session {i}: velocity and acceleration lengths differ"
                )));
            }
        }
        for (i, e) in self.charging_events.iter().enumerate() {
            if !(e.duration_h > 0.0) || !(e.power_w > 0.0) {
                return Err(ScenarioError::InvalidDuration(format!("charging event {i}")));
            }
        }
        for (name, s) in services {
            if let Some(s) = s {
                if s.power.is_empty() || !(s.power.sample_period > 0.0) {
                    return Err(ScenarioError::InvalidDuration(name.to_string()));
                }
            }
        }
        Ok(())
    }
}

// ---------------------------------------------------------------------------
// Configuration
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ChargerRatings {
    pub l1_w: f64,
    pub l2_w: f64,
    pub l3_w: f64,
}

impl Default for ChargerRatings {
    fn default() -> Self {
        Self { l1_w: 1_400.0, l2_w: 6_600.0, l3_w: 50_000.0 }
    }
}

impl ChargerRatings {
    pub fn rating(&self, c: Charger) -> f64 {
        match c {
            Charger::L1 => self.l1_w,
            Charger::L2 => self.l2_w,
            Charger::L3 => self.l3_w,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ScenarioConfig {
    /// Cells per pack; pack quantities are divided by this at the model boundary.
    pub cells: f64,
    pub cell_voltage: f64,
    pub nominal_capacity: f64,
    pub chargers: ChargerRatings,
    /// Share of end-of-day recharge events per charger (L1, L2, L3).
    pub charger_mix: [f64; 3],
    pub soc_min: f64,
    pub soc_max: f64,
    pub soc_init: f64,
    pub drivetrain_efficiency: f64,
    /// Fraction of negative wheel power returned to the battery.
    pub regen_efficiency: f64,
    /// Auxiliary load as a fraction of mean traction power.
    pub aux_fraction: f64,
    /// Width of the bins driving power is integrated over (s).
    pub drive_bin_s: f64,
    /// Days of the composed profile that become duty cycles.
    pub duty_days: usize,
}

impl Default for ScenarioConfig {
    fn default() -> Self {
        Self {
            cells: 1740.0,
            cell_voltage: 3.3,
            nominal_capacity: 2.3,
            chargers: ChargerRatings::default(),
            charger_mix: [0.38, 0.55, 0.07],
            soc_min: 0.1,
            soc_max: 0.9,
            soc_init: 0.9,
            drivetrain_efficiency: 0.9,
            regen_efficiency: 0.2,
            aux_fraction: 0.1,
            drive_bin_s: 60.0,
            duty_days: 30,
        }
    }
}

impl ScenarioConfig {
    /// Pack watts that correspond to 1C on every cell.
    pub fn watts_per_c(&self) -> f64 {
        self.cells * self.cell_voltage * self.nominal_capacity
    }

    pub fn validate(&self) -> Result<(), ScenarioError> {
        let bad = |m: &str| Err(ScenarioError::InvalidConfig(m.to_string()));
        if !(self.cells > 0.0 && self.cell_voltage > 0.0 && self.nominal_capacity > 0.0) {
            return bad("cells, cell voltage and capacity must be positive");
        }
        if !(0.0 < self.soc_min && self.soc_min < self.soc_max && self.soc_max < 1.0) {
            return bad("SOC window must satisfy 0 < min < max < 1");
        }
        if !(self.soc_min..=self.soc_max).contains(&self.soc_init) {
            return bad("initial SOC must lie inside the window");
        }
        if self.charger_mix.iter().any(|m| *m < 0.0) || self.charger_mix.iter().sum::<f64>() <= 0.0 {
            return bad("charger mix must be non-negative with a positive sum");
        }
        if !(self.drivetrain_efficiency > 0.0 && self.drivetrain_efficiency <= 1.0) {
            return bad("drivetrain efficiency must lie in (0, 1]");
        }
        if !(self.drive_bin_s > 0.0) {
            return bad("drive bin width must be positive");
        }
        Ok(())
    }
}

// ---------------------------------------------------------------------------
// Composition
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ProfileStep {
    pub task: Option<Task>,
    /// Mean pack power over the step (W, positive discharges).
    pub power_w: f64,
    /// Mean absolute pack power over the step (W).
    pub abs_power_w: f64,
    pub hours: f64,
}

/// Per-task intensity per active day, cell level.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TaskIntensity {
    /// Absolute Ah throughput per active day.
    pub ah: f64,
    /// Mean absolute C-rate while the task runs.
    pub c_rate: f64,
    /// Net charge moved per active day over nominal capacity.
    pub dod: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComposedProfile {
    pub days: usize,
    pub steps: Vec<ProfileStep>,
    /// SOC at every step boundary (`steps.len() + 1` values).
    pub soc: Vec<f64>,
    /// Index of the first step of each day, plus a final end marker.
    pub day_offsets: Vec<usize>,
    /// Cell-level absolute Ah per task.
    pub ah_by_task: [f64; TASK_COUNT],
    /// Cell-level signed Ah per task (positive discharges).
    pub net_ah_by_task: [f64; TASK_COUNT],
    pub hours_by_task: [f64; TASK_COUNT],
    pub active_days: [usize; TASK_COUNT],
    /// Mean positive wheel power over the driving sessions (pack W).
    pub mean_traction_w: f64,
    pub cells: f64,
    pub cell_voltage: f64,
    pub nominal_capacity: f64,
    pub soc_window: (f64, f64),
    pub soc_init: f64,
}

impl ComposedProfile {
    pub fn total_ah(&self) -> f64 {
        self.ah_by_task.iter().sum()
    }

    pub fn intensity(&self, task: Task) -> Option<TaskIntensity> {
        let k = task.index();
        if self.active_days[k] == 0 || self.hours_by_task[k] <= 0.0 {
            return None;
        }
        let days = self.active_days[k] as f64;
        Some(TaskIntensity {
            ah: self.ah_by_task[k] / days,
            c_rate: self.ah_by_task[k] / self.hours_by_task[k] / self.nominal_capacity,
            dod: self.net_ah_by_task[k].abs() / days / self.nominal_capacity,
        })
    }

    /// Mean absolute pack power while the task runs (W).
    pub fn task_power_w(&self, task: Task) -> f64 {
        let k = task.index();
        if self.hours_by_task[k] <= 0.0 {
            return 0.0;
        }
        self.ah_by_task[k] / self.hours_by_task[k] * self.cells * self.cell_voltage
    }

    /// Time-averaged SOC over the whole horizon.
    pub fn mean_soc(&self) -> f64 {
        let mut area = 0.0;
        let mut time = 0.0;
        for (i, s) in self.steps.iter().enumerate() {
            area += 0.5 * (self.soc[i] + self.soc[i + 1]) * s.hours;
            time += s.hours;
        }
        area / time
    }

    /// Duty map for the model: the first `max_days` days as cycles of
    /// cell C-rate steps, consecutive equal rates merged.
    pub fn duty(&self, c_rate_ref: f64, max_days: usize) -> Duty {
        let watts_per_c = self.cells * self.cell_voltage * self.nominal_capacity;
        let n_days = self.days.min(max_days.max(1));
        let cycles = (0..n_days)
            .map(|d| {
                let mut steps: Vec<DutyStep> = Vec::new();
                for s in &self.steps[self.day_offsets[d]..self.day_offsets[d + 1]] {
                    let c_rate = s.power_w / watts_per_c;
                    match steps.last_mut() {
                        Some(last) if last.c_rate == c_rate => last.hours += s.hours,
                        _ => steps.push(DutyStep { c_rate, hours: s.hours }),
                    }
                }
                DutyCycle { weight: 1.0, steps }
            })
            .collect();
        Duty {
            c_rate_ref,
            ah_ref: self.total_ah(),
            soc_init: self.soc_init,
            soc_min: self.soc_window.0,
            soc_max: self.soc_window.1,
            cycles,
            fixed_throughput: false,
        }
    }
}

/// Battery power of one driving session, binned: `(net W, |W| mean, hours)`.
fn drive_bins(session: &DrivingSession, vehicle: &VehicleSpec, cfg: &ScenarioConfig) -> (Vec<(f64, f64, f64)>, f64) {
    let v = &session.velocity.values;
    let a = &session.accel.values;
    let dt = session.velocity.sample_period;
    let wheel: Vec<f64> = a.iter().zip(v).map(|(a, v)| vehicle.wheel_power(*a, v.max(0.0))).collect();
    let traction = wheel.iter().map(|w| w.max(0.0)).sum::<f64>() / wheel.len() as f64;
    let aux = cfg.aux_fraction * traction;
    let battery: Vec<f64> = wheel
        .iter()
        .map(|w| {
            if *w >= 0.0 {
                w / cfg.drivetrain_efficiency + aux
            } else {
                w * cfg.regen_efficiency + aux
            }
        })
        .collect();
    let per_bin = ((cfg.drive_bin_s / dt).round() as usize).max(1);
    let bins = battery
        .chunks(per_bin)
        .map(|c| {
            let n = c.len() as f64;
            (
                c.iter().sum::<f64>() / n,
                c.iter().map(|p| p.abs()).sum::<f64>() / n,
                n * dt / 3600.0,
            )
        })
        .collect();
    (bins, traction)
}

struct Composer<'a> {
    cfg: &'a ScenarioConfig,
    watts_per_c: f64,
    steps: Vec<ProfileStep>,
    soc_trace: Vec<f64>,
    soc: f64,
    t_day: f64,
    ah: [f64; TASK_COUNT],
    net: [f64; TASK_COUNT],
    hours: [f64; TASK_COUNT],
    active_today: [bool; TASK_COUNT],
    charger_events: [usize; 3],
}

impl Composer<'_> {
    fn record(&mut self, task: Option<Task>, power_w: f64, abs_power_w: f64, hours: f64) {
        if hours <= 0.0 {
            return;
        }
        let c_net = power_w / self.watts_per_c;
        self.soc = (self.soc - c_net * hours).clamp(self.cfg.soc_min, self.cfg.soc_max);
        self.steps.push(ProfileStep { task, power_w, abs_power_w, hours });
        self.soc_trace.push(self.soc);
        self.t_day += hours;
        if let Some(t) = task {
            let k = t.index();
            let cap = self.cfg.nominal_capacity;
            self.ah[k] += abs_power_w / self.watts_per_c * cap * hours;
            self.net[k] += c_net * cap * hours;
            self.hours[k] += hours;
            self.active_today[k] = true;
        }
    }

    /// Runs a step, splitting it at the window bounds. Discharges that reach
    /// the floor trigger an L2 recharge to the ceiling and then resume;
    /// charging that reaches the ceiling stops and the rest of the step idles.
    fn push(&mut self, task: Option<Task>, power_w: f64, abs_power_w: f64, hours: f64) {
        let mut remaining = hours;
        let c_net = power_w / self.watts_per_c;
        let mut guard = 0;
        while remaining > 0.0 {
            guard += 1;
            if c_net > 0.0 {
                let room = self.soc - self.cfg.soc_min;
                let t_hit = room / c_net;
                if t_hit >= remaining || guard > 64 {
                    self.record(task, power_w, abs_power_w, remaining);
                    return;
                }
                self.record(task, power_w, abs_power_w, t_hit);
                remaining -= t_hit;
                let l2 = Charger::L2;
                self.recharge(l2, self.cfg.soc_max);
            } else if c_net < 0.0 {
                let room = self.cfg.soc_max - self.soc;
                let t_hit = room / -c_net;
                if t_hit >= remaining {
                    self.record(task, power_w, abs_power_w, remaining);
                } else {
                    self.record(task, power_w, abs_power_w, t_hit);
                    self.record(None, 0.0, 0.0, remaining - t_hit);
                }
                return;
            } else {
                self.record(task, power_w, abs_power_w, remaining);
                return;
            }
        }
    }

    fn recharge(&mut self, charger: Charger, target: f64) {
        let rating = self.cfg.chargers.rating(charger);
        let c = rating / self.watts_per_c;
        let hours = (target - self.soc).max(0.0) / c;
        if hours > 0.0 {
            self.record(Some(charger.task()), -rating, rating, hours);
            self.soc = target;
            if let Some(last) = self.soc_trace.last_mut() {
                *last = target;
            }
        }
    }

    fn idle_until(&mut self, hour: f64) {
        if self.t_day < hour {
            let gap = hour - self.t_day;
            self.record(None, 0.0, 0.0, gap);
        }
    }

    /// Charger with the largest shortfall against the mix.
    fn pick_charger(&mut self) -> Charger {
        let total: f64 = self.cfg.charger_mix.iter().sum();
        let next = self.charger_events.iter().sum::<usize>() as f64 + 1.0;
        let mut best = 0;
        let mut best_deficit = f64::NEG_INFINITY;
        for (k, share) in self.cfg.charger_mix.iter().enumerate() {
            let deficit = share / total * next - self.charger_events[k] as f64;
            if deficit > best_deficit + 1e-12 {
                best = k;
                best_deficit = deficit;
            }
        }
        self.charger_events[best] += 1;
        Charger::ALL[best]
    }

    fn service(&mut self, task: Task, profile: &ServiceProfile) {
        // services run through an L2 station
        let cap = self.cfg.chargers.l2_w;
        let hours = profile.power.sample_period / 3600.0;
        for p in &profile.power.values {
            let p = p.clamp(-cap, cap);
            self.push(Some(task), p, p.abs(), hours);
        }
    }
}

const SLOT_DRIVE_FIRST: f64 = 0.0;
const SLOT_SOLAR: f64 = 4.0;
const SLOT_FREQ: f64 = 7.0;
const SLOT_DRIVE_SECOND: f64 = 10.0;
const SLOT_PEAK: f64 = 12.0;
const SLOT_DRIVE_MORE: f64 = 13.0;
const SLOT_CHARGING: f64 = 14.0;
const SLOT_RECHARGE: f64 = 15.0;

/// Plays the schedule forward for `days` days.
pub fn compose_profile(
    schedule: &DailyTaskSchedule,
    vehicle: &VehicleSpec,
    days: usize,
    cfg: &ScenarioConfig,
) -> Result<ComposedProfile, ScenarioError> {
    schedule.validate()?;
    vehicle.validate()?;
    cfg.validate()?;
    if days == 0 {
        return Err(ScenarioError::InvalidDuration("days".into()));
    }
    let mut traction_sum = 0.0;
    let mut traction_hours = 0.0;
    let sessions: Vec<Vec<(f64, f64, f64)>> = schedule
        .driving_sessions
        .iter()
        .map(|s| {
            let (bins, traction) = drive_bins(s, vehicle, cfg);
            traction_sum += traction * s.duration_h();
            traction_hours += s.duration_h();
            bins
        })
        .collect();

    let mut c = Composer {
        cfg,
        watts_per_c: cfg.watts_per_c(),
        steps: Vec::new(),
        soc_trace: vec![cfg.soc_init],
        soc: cfg.soc_init,
        t_day: 0.0,
        ah: [0.0; TASK_COUNT],
        net: [0.0; TASK_COUNT],
        hours: [0.0; TASK_COUNT],
        active_today: [false; TASK_COUNT],
        charger_events: [0; 3],
    };
    let mut day_offsets = Vec::with_capacity(days + 1);
    let mut active_days = [0usize; TASK_COUNT];

    let drive = |c: &mut Composer, bins: &[(f64, f64, f64)]| {
        for &(net, abs, h) in bins {
            c.push(Some(Task::Driving), net, abs, h);
        }
    };

    for day in 0..days {
        day_offsets.push(c.steps.len());
        c.t_day = 0.0;
        c.active_today = [false; TASK_COUNT];

        if let Some(s) = sessions.first() {
            c.idle_until(SLOT_DRIVE_FIRST);
            drive(&mut c, s);
        }
        if let Some(p) = schedule.solar.as_ref().filter(|p| p.repeat.active_on(day)) {
            c.idle_until(SLOT_SOLAR);
            c.service(Task::Solar, p);
        }
        if let Some(p) = schedule.freq_regulation.as_ref().filter(|p| p.repeat.active_on(day)) {
            c.idle_until(SLOT_FREQ);
            c.service(Task::FreqRegulation, p);
        }
        if let Some(s) = sessions.get(1) {
            c.idle_until(SLOT_DRIVE_SECOND);
            drive(&mut c, s);
        }
        if let Some(p) = schedule.peak_shaving.as_ref().filter(|p| p.repeat.active_on(day)) {
            c.idle_until(SLOT_PEAK);
            c.service(Task::PeakShaving, p);
        }
        for s in sessions.iter().skip(2) {
            c.idle_until(SLOT_DRIVE_MORE);
            drive(&mut c, s);
        }
        for e in &schedule.charging_events {
            c.idle_until(SLOT_CHARGING);
            c.push(Some(e.charger.task()), -e.power_w, e.power_w, e.duration_h);
        }
        if c.soc < cfg.soc_init - EPS_SOC {
            c.idle_until(SLOT_RECHARGE);
            let charger = c.pick_charger();
            c.recharge(charger, cfg.soc_init);
        }
        if c.t_day > HOURS_PER_DAY + 1e-9 {
            return Err(ScenarioError::ScheduleInfeasible { day, hours: c.t_day });
        }
        c.idle_until(HOURS_PER_DAY);
        for (k, active) in c.active_today.iter().enumerate() {
            active_days[k] += usize::from(*active);
        }
        // solar or explicit charging may end the day above the initial SOC
        // with nothing to pull it down; the next day starts from there.
    }
    day_offsets.push(c.steps.len());

    Ok(ComposedProfile {
        days,
        steps: c.steps,
        soc: c.soc_trace,
        day_offsets,
        ah_by_task: c.ah,
        net_ah_by_task: c.net,
        hours_by_task: c.hours,
        active_days,
        mean_traction_w: if traction_hours > 0.0 { traction_sum / traction_hours } else { 0.0 },
        cells: cfg.cells,
        cell_voltage: cfg.cell_voltage,
        nominal_capacity: cfg.nominal_capacity,
        soc_window: (cfg.soc_min, cfg.soc_max),
        soc_init: cfg.soc_init,
    })
}

/// Fraction of absolute Ah throughput per task, `k1..k7` order.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TaskShares {
    pub ah_share: [f64; TASK_COUNT],
}

impl TaskShares {
    pub fn single(task: Task) -> Self {
        let mut ah_share = [0.0; TASK_COUNT];
        ah_share[task.index()] = 1.0;
        Self { ah_share }
    }

    /// Share of coefficient `n` (1..=7).
    pub fn get(&self, n: usize) -> f64 {
        self.ah_share[n - 1]
    }

    pub fn of(&self, task: Task) -> f64 {
        self.ah_share[task.index()]
    }
}

pub fn task_shares(profile: &ComposedProfile) -> Result<TaskShares, ScenarioError> {
    let total = profile.total_ah();
    if !(total > 0.0) {
        return Err(ScenarioError::NoThroughput);
    }
    Ok(TaskShares { ah_share: profile.ah_by_task.map(|a| a / total) })
}

/// Model observation for a composed profile.
///
/// Driving samples are decorrelated per session, task powers are the mean
/// absolute pack power of each task while it runs, and the duty map is
/// anchored at the C-rate `y` of a deterministic pass with `params` so that
/// the Ah factor's mean at that C-rate is the profile's total throughput.
pub fn scenario_observation(
    id: &str,
    profile: &ComposedProfile,
    schedule: &DailyTaskSchedule,
    temperature_k: Vec<f64>,
    params: &ParameterSet,
    cfg: &ScenarioConfig,
    model_cfg: &ModelConfig,
) -> Result<Observation, ScenarioError> {
    let mut accel = Vec::new();
    let mut velocity = Vec::new();
    for s in &schedule.driving_sessions {
        let (a, v, _) = reduce_paired(&s.accel, &s.velocity, DEFAULT_DECORRELATION_THRESHOLD);
        accel.extend(a.values);
        velocity.extend(v.values);
    }
    let mut grid_powers = GridPowers::default();
    for task in &Task::ALL[1..] {
        grid_powers.set(task.coefficient(), profile.task_power_w(*task));
    }
    let mut obs = Observation {
        id: id.to_string(),
        fade: Vec::new(),
        temperature: temperature_k,
        accel,
        velocity,
        grid_powers,
        duty: profile.duty(1.0, cfg.duty_days),
        cells: cfg.cells,
        aux_reference_power: profile.mean_traction_w.max(if schedule.driving_sessions.is_empty() {
            0.0
        } else {
            1.0
        }),
    };
    let unit = deterministic_latents(&obs, params, model_cfg.priors.efficiency.mean, model_cfg)?;
    obs.duty.c_rate_ref = unit.c_rate;
    obs.validate()?;
    Ok(obs)
}

/// Initial parameters for a scenario: fade law from `fade_law`, contribution
/// coefficients from the task shares, vehicle terms from `vehicle`.
pub fn scenario_parameters(
    fade_law: &ParameterSet,
    shares: &TaskShares,
    vehicle: &VehicleSpec,
    k_floor: f64,
) -> ParameterSet {
    ParameterSet {
        k: std::array::from_fn(|n| shares.get(n + 1).max(k_floor)),
        mass: vehicle.total_mass(),
        aero: vehicle.aero_coefficient(),
        rolling: vehicle.rolling_force(),
        ..*fade_law
    }
}

/// One observation per location with the base duty and that location's
/// temperatures (°C in, K out).
pub fn climate_observations(
    locations: &[(String, TimeSeries)],
    base: &Observation,
) -> Result<ObservationSet, ScenarioError> {
    if locations.is_empty() {
        return Err(ScenarioError::NoLocations);
    }
    let observations = locations
        .iter()
        .map(|(name, temps)| Observation {
            id: name.clone(),
            temperature: temps.values.iter().map(|c| c + 273.15).collect(),
            ..base.clone()
        })
        .collect();
    Ok(ObservationSet::new(observations))
}
