//! The battery-fade Bayesian network.
//!
//! Data, process and parameter layers:
//!
//! * observations per unit `i`: fade replicates `q`, temperature samples `T`,
//!   acceleration/velocity samples `a`, `v`, and perfectly observed task
//!   powers `Pg[2..=7]`;
//! * per-unit latents: `λ, T̂, Ic, Ah, SOC, u, Pb, Pw, Paux, â, v̂` plus the
//!   global drivetrain efficiency `δ`;
//! * parameters: the fade law (`α, β, Ea, η, ζ, ε`), contribution
//!   coefficients `k1..k7` and the vehicle terms `γ, ω, φ`.
//!
//! The unnormalized log posterior is a sum of log-density factors. The full
//! conditional of one variable is the sum of the factors it appears in, so a
//! Metropolis-Hastings visit only has to evaluate a handful of terms.
//!
//! Units: temperatures in kelvin, powers in watts, `Ic` in C-rate (current
//! divided by nominal capacity, magnitude only), fades in percent. Task and
//! wheel powers are pack-level; `Pb` is cell-level, the pack-to-cell factor is
//! the observation's `cells` count.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::dist::{DistSpec, Family};

pub const GAS_CONSTANT: f64 = 8.314;
pub const TASK_COUNT: usize = 7;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ModelError {
    #[error("domain error: {0}")]
    Domain(String),
    #[error("unknown variable '{0}'")]
    UnknownVariable(String),
    #[error("invalid observation '{id}': {reason}")]
    InvalidObservation { id: String, reason: String },
    #[error("invalid state: {0}")]
    InvalidState(String),
}

fn domain(msg: impl Into<String>) -> ModelError {
    ModelError::Domain(msg.into())
}

// ---------------------------------------------------------------------------
// Observations
// ---------------------------------------------------------------------------

/// One signed step of a duty profile. Positive C-rate discharges.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DutyStep {
    pub c_rate: f64,
    pub hours: f64,
}

/// A representative cycle, started from the duty's initial SOC.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DutyCycle {
    pub weight: f64,
    pub steps: Vec<DutyStep>,
}

/// Maps the unit's C-rate onto the means of its Ah and SOC factors.
///
/// The profile is scaled so that its reference C-rate becomes the current
/// `Ic`: Ah throughput scales linearly and SOC is re-integrated by coulomb
/// counting from `soc_init`, clipped to the SOC window. With
/// `fixed_throughput` the horizon ends at a set throughput (a cycling-test
/// checkpoint), so the current changes the elapsed time but not the Ah.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Duty {
    pub c_rate_ref: f64,
    pub ah_ref: f64,
    pub soc_init: f64,
    pub soc_min: f64,
    pub soc_max: f64,
    pub cycles: Vec<DutyCycle>,
    #[serde(default)]
    pub fixed_throughput: bool,
}

const SOC_MEAN_BOUNDS: (f64, f64) = (0.01, 0.99);

impl Duty {
    /// Constant-current cycling between `soc_min` and `soc_max` at `c_rate`,
    /// with a rest at one end of the window so that the time-averaged SOC
    /// equals `soc_avg`. SOC values are fractions.
    pub fn cycling(c_rate: f64, soc_min: f64, soc_max: f64, soc_avg: f64, ah: f64) -> Self {
        let dod = (soc_max - soc_min).max(1e-6);
        let leg = dod / c_rate;
        let mid = 0.5 * (soc_max + soc_min);
        let mut steps = Vec::with_capacity(4);
        if soc_avg > mid && soc_avg < soc_max {
            let rest = 2.0 * leg * (soc_avg - mid) / (soc_max - soc_avg);
            steps.push(DutyStep { c_rate: 0.0, hours: rest });
        }
        steps.push(DutyStep { c_rate, hours: leg });
        if soc_avg < mid && soc_avg > soc_min {
            let rest = 2.0 * leg * (mid - soc_avg) / (soc_avg - soc_min);
            steps.push(DutyStep { c_rate: 0.0, hours: rest });
        }
        steps.push(DutyStep { c_rate: -c_rate, hours: leg });
        Self {
            c_rate_ref: c_rate,
            ah_ref: ah,
            soc_init: soc_max,
            soc_min,
            soc_max,
            cycles: vec![DutyCycle { weight: 1.0, steps }],
            fixed_throughput: true,
        }
    }

    pub fn ah_mean(&self, c_rate: f64) -> f64 {
        if self.fixed_throughput {
            return self.ah_ref;
        }
        self.ah_ref * c_rate / self.c_rate_ref
    }

    /// Time-averaged coulomb-counted SOC at the given C-rate scaling.
    pub fn soc_mean(&self, c_rate: f64) -> f64 {
        let scale = c_rate / self.c_rate_ref;
        let (lo, hi) = (self.soc_min, self.soc_max);
        let mut area = 0.0;
        let mut time = 0.0;
        for cycle in &self.cycles {
            let mut soc = self.soc_init.clamp(lo, hi);
            let mut cycle_area = 0.0;
            let mut cycle_time = 0.0;
            for step in &cycle.steps {
                let delta = -scale * step.c_rate * step.hours;
                let target = soc + delta;
                let end = target.clamp(lo, hi);
                let seg = if target == end || delta == 0.0 {
                    0.5 * (soc + end) * step.hours
                } else {
                    // linear until the bound is hit, flat afterwards
                    let frac = (end - soc) / delta;
                    let t_hit = frac * step.hours;
                    0.5 * (soc + end) * t_hit + end * (step.hours - t_hit)
                };
                cycle_area += seg;
                cycle_time += step.hours;
                soc = end;
            }
            area += cycle.weight * cycle_area;
            time += cycle.weight * cycle_time;
        }
        let mean = if time > 0.0 { area / time } else { self.soc_init };
        mean.clamp(SOC_MEAN_BOUNDS.0, SOC_MEAN_BOUNDS.1)
    }
}

/// Task powers `Pg[n]` for `n = 2..=7` (L1, L2, L3 charging, solar, frequency
/// regulation, peak shaving), pack-level watts, perfectly observed.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct GridPowers(pub [f64; 6]);

impl GridPowers {
    /// Power of task `n` (2..=7).
    pub fn get(&self, n: usize) -> f64 {
        self.0[n - 2]
    }

    pub fn set(&mut self, n: usize, value: f64) {
        self.0[n - 2] = value;
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Observation {
    pub id: String,
    /// Fade replicates `q_ij` in percent; empty when estimating.
    pub fade: Vec<f64>,
    /// Temperature samples in kelvin.
    pub temperature: Vec<f64>,
    /// Acceleration samples (m/s²); empty when the unit has no driving.
    pub accel: Vec<f64>,
    /// Velocity samples (m/s), paired with `accel`.
    pub velocity: Vec<f64>,
    pub grid_powers: GridPowers,
    pub duty: Duty,
    /// Cells per pack; 1 for cell-level test data.
    pub cells: f64,
    /// Reference driving power (pack W) for the auxiliary-power prior.
    pub aux_reference_power: f64,
}

impl Observation {
    pub fn has_drive(&self) -> bool {
        !self.accel.is_empty()
    }

    pub fn fade_mean(&self) -> Option<f64> {
        (!self.fade.is_empty()).then(|| mean(&self.fade))
    }

    pub fn validate(&self) -> Result<(), ModelError> {
        let bad = |reason: &str| ModelError::InvalidObservation {
            id: self.id.clone(),
            reason: reason.to_string(),
        };
        if self.temperature.is_empty() {
            return Err(bad("at least one temperature sample is required"));
        }
        if self.temperature.iter().any(|t| !(*t > 0.0)) {
            return Err(bad("temperatures must be positive kelvin"));
        }
        if self.fade.iter().any(|q| !(0.0..=100.0).contains(q)) {
            return Err(bad("fade values must lie in [0, 100]"));
        }
        if self.accel.len() != self.velocity.len() {
            return Err(bad("acceleration and velocity must have equal length"));
        }
        if self.has_drive() && !(self.aux_reference_power > 0.0) {
            return Err(bad("driving units need a positive auxiliary reference power"));
        }
        if !(self.cells > 0.0) {
            return Err(bad("cell count must be positive"));
        }
        let d = &self.duty;
        if !(d.c_rate_ref > 0.0) || !(d.ah_ref > 0.0) {
            return Err(bad("duty reference C-rate and Ah must be positive"));
        }
        if !(d.soc_min < d.soc_max) {
            return Err(bad("duty SOC window is empty"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct ObservationSet {
    pub observations: Vec<Observation>,
}

impl ObservationSet {
    pub fn new(observations: Vec<Observation>) -> Self {
        Self { observations }
    }

    pub fn len(&self) -> usize {
        self.observations.len()
    }

    pub fn is_empty(&self) -> bool {
        self.observations.is_empty()
    }

    pub fn validate(&self) -> Result<(), ModelError> {
        self.observations.iter().try_for_each(Observation::validate)
    }
}

// ---------------------------------------------------------------------------
// State and parameters
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct UnitLatent {
    pub lambda: f64,
    pub temp_hat: f64,
    pub c_rate: f64,
    pub amp_hours: f64,
    pub soc: f64,
    pub voltage: f64,
    pub battery_power: f64,
    pub wheel_power: f64,
    pub aux_power: f64,
    pub accel_hat: f64,
    pub vel_hat: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LatentState {
    pub units: Vec<UnitLatent>,
    pub efficiency: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ParameterSet {
    pub alpha: f64,
    pub beta: f64,
    pub activation_energy: f64,
    pub eta: f64,
    pub zeta: f64,
    pub epsilon: f64,
    /// Contribution coefficients `k1..k7`, index 0 is driving.
    pub k: [f64; TASK_COUNT],
    /// γ: total vehicle mass including passengers (kg).
    pub mass: f64,
    /// ω: aerodynamic drag coefficient (kg/m).
    pub aero: f64,
    /// φ: rolling resistance plus grade (N).
    pub rolling: f64,
}

impl ParameterSet {
    pub fn get(&self, kind: ParamKind) -> f64 {
        match kind {
            ParamKind::Alpha => self.alpha,
            ParamKind::Beta => self.beta,
            ParamKind::ActivationEnergy => self.activation_energy,
            ParamKind::Eta => self.eta,
            ParamKind::Zeta => self.zeta,
            ParamKind::Epsilon => self.epsilon,
            ParamKind::K(n) => self.k[n as usize - 1],
            ParamKind::Mass => self.mass,
            ParamKind::Aero => self.aero,
            ParamKind::Rolling => self.rolling,
        }
    }

    pub fn set(&mut self, kind: ParamKind, value: f64) {
        let slot = match kind {
            ParamKind::Alpha => &mut self.alpha,
            ParamKind::Beta => &mut self.beta,
            ParamKind::ActivationEnergy => &mut self.activation_energy,
            ParamKind::Eta => &mut self.eta,
            ParamKind::Zeta => &mut self.zeta,
            ParamKind::Epsilon => &mut self.epsilon,
            ParamKind::K(n) => &mut self.k[n as usize - 1],
            ParamKind::Mass => &mut self.mass,
            ParamKind::Aero => &mut self.aero,
            ParamKind::Rolling => &mut self.rolling,
        };
        *slot = value;
    }

    pub fn validate(&self) -> Result<(), ModelError> {
        let ok = self.activation_energy > 0.0
            && self.zeta > 0.0
            && self.mass > 0.0
            && self.aero > 0.0
            && self.rolling >= 0.0
            && self.k.iter().all(|k| *k >= 0.0);
        if ok {
            Ok(())
        } else {
            Err(ModelError::InvalidState(format!("parameter invariants violated: {self:?}")))
        }
    }
}

// ---------------------------------------------------------------------------
// Variable identifiers
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum LatentKind {
    Lambda,
    TempHat,
    CRate,
    AmpHours,
    Soc,
    Voltage,
    BatteryPower,
    WheelPower,
    AuxPower,
    AccelHat,
    VelHat,
}

impl LatentKind {
    pub const ALL: [LatentKind; 11] = [
        LatentKind::Lambda,
        LatentKind::TempHat,
        LatentKind::CRate,
        LatentKind::AmpHours,
        LatentKind::Soc,
        LatentKind::Voltage,
        LatentKind::BatteryPower,
        LatentKind::WheelPower,
        LatentKind::AuxPower,
        LatentKind::AccelHat,
        LatentKind::VelHat,
    ];

    pub fn name(self) -> &'static str {
        match self {
            LatentKind::Lambda => "lambda",
            LatentKind::TempHat => "T_hat",
            LatentKind::CRate => "Ic",
            LatentKind::AmpHours => "Ah",
            LatentKind::Soc => "SOC",
            LatentKind::Voltage => "u",
            LatentKind::BatteryPower => "Pb",
            LatentKind::WheelPower => "Pw",
            LatentKind::AuxPower => "Paux",
            LatentKind::AccelHat => "a_hat",
            LatentKind::VelHat => "v_hat",
        }
    }

    pub fn family(self) -> Family {
        match self {
            LatentKind::Lambda
            | LatentKind::AmpHours
            | LatentKind::Voltage
            | LatentKind::AuxPower
            | LatentKind::VelHat => Family::Gamma,
            LatentKind::Soc => Family::Beta,
            LatentKind::CRate => Family::Rayleigh,
            LatentKind::TempHat
            | LatentKind::BatteryPower
            | LatentKind::WheelPower
            | LatentKind::AccelHat => Family::Normal,
        }
    }

    /// Nodes that exist only for units with driving data.
    pub fn is_drive(self) -> bool {
        matches!(
            self,
            LatentKind::WheelPower | LatentKind::AuxPower | LatentKind::AccelHat | LatentKind::VelHat
        )
    }

    fn get(self, u: &UnitLatent) -> f64 {
        match self {
            LatentKind::Lambda => u.lambda,
            LatentKind::TempHat => u.temp_hat,
            LatentKind::CRate => u.c_rate,
            LatentKind::AmpHours => u.amp_hours,
            LatentKind::Soc => u.soc,
            LatentKind::Voltage => u.voltage,
            LatentKind::BatteryPower => u.battery_power,
            LatentKind::WheelPower => u.wheel_power,
            LatentKind::AuxPower => u.aux_power,
            LatentKind::AccelHat => u.accel_hat,
            LatentKind::VelHat => u.vel_hat,
        }
    }

    fn slot(self, u: &mut UnitLatent) -> &mut f64 {
        match self {
            LatentKind::Lambda => &mut u.lambda,
            LatentKind::TempHat => &mut u.temp_hat,
            LatentKind::CRate => &mut u.c_rate,
            LatentKind::AmpHours => &mut u.amp_hours,
            LatentKind::Soc => &mut u.soc,
            LatentKind::Voltage => &mut u.voltage,
            LatentKind::BatteryPower => &mut u.battery_power,
            LatentKind::WheelPower => &mut u.wheel_power,
            LatentKind::AuxPower => &mut u.aux_power,
            LatentKind::AccelHat => &mut u.accel_hat,
            LatentKind::VelHat => &mut u.vel_hat,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum ParamKind {
    Alpha,
    Beta,
    ActivationEnergy,
    Eta,
    Zeta,
    Epsilon,
    /// Contribution coefficient `k_n`, n in 1..=7.
    K(u8),
    Mass,
    Aero,
    Rolling,
}

impl ParamKind {
    /// Sweep order.
    pub fn all() -> Vec<ParamKind> {
        let mut v = vec![
            ParamKind::Alpha,
            ParamKind::Beta,
            ParamKind::ActivationEnergy,
            ParamKind::Eta,
            ParamKind::Zeta,
            ParamKind::Epsilon,
        ];
        v.extend((1..=TASK_COUNT as u8).map(ParamKind::K));
        v.extend([ParamKind::Mass, ParamKind::Aero, ParamKind::Rolling]);
        v
    }

    /// The parameters of the fade law.
    pub const FADE_LAW: [ParamKind; 6] = [
        ParamKind::Alpha,
        ParamKind::Beta,
        ParamKind::ActivationEnergy,
        ParamKind::Eta,
        ParamKind::Zeta,
        ParamKind::Epsilon,
    ];

    pub fn family(self) -> Family {
        match self {
            // sign-free parameters: slope, C-rate factor and the zero-centred residual
            ParamKind::Alpha | ParamKind::Eta | ParamKind::Epsilon => Family::Normal,
            _ => Family::Gamma,
        }
    }
}

impl fmt::Display for ParamKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ParamKind::Alpha => f.write_str("alpha"),
            ParamKind::Beta => f.write_str("beta"),
            ParamKind::ActivationEnergy => f.write_str("Ea"),
            ParamKind::Eta => f.write_str("eta"),
            ParamKind::Zeta => f.write_str("zeta"),
            ParamKind::Epsilon => f.write_str("epsilon"),
            ParamKind::K(n) => write!(f, "k{n}"),
            ParamKind::Mass => f.write_str("gamma"),
            ParamKind::Aero => f.write_str("omega"),
            ParamKind::Rolling => f.write_str("phi"),
        }
    }
}

/// A node of the network.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum VarId {
    Latent(usize, LatentKind),
    Efficiency,
    Param(ParamKind),
}

impl VarId {
    pub fn family(self) -> Family {
        match self {
            VarId::Latent(_, kind) => kind.family(),
            VarId::Efficiency => Family::Beta,
            VarId::Param(p) => p.family(),
        }
    }

    pub fn is_global(self) -> bool {
        !matches!(self, VarId::Latent(..))
    }
}

impl fmt::Display for VarId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            VarId::Latent(i, kind) => write!(f, "{}[{i}]", kind.name()),
            VarId::Efficiency => f.write_str("delta"),
            VarId::Param(p) => p.fmt(f),
        }
    }
}

impl FromStr for VarId {
    type Err = ModelError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let unknown = || ModelError::UnknownVariable(s.to_string());
        if let Some((name, rest)) = s.split_once('[') {
            let idx: usize = rest.strip_suffix(']').ok_or_else(unknown)?.parse().map_err(|_| unknown())?;
            let kind = LatentKind::ALL
                .into_iter()
                .find(|k| k.name() == name)
                .ok_or_else(unknown)?;
            return Ok(VarId::Latent(idx, kind));
        }
        if s == "delta" {
            return Ok(VarId::Efficiency);
        }
        ParamKind::all()
            .into_iter()
            .find(|p| p.to_string() == s)
            .map(VarId::Param)
            .ok_or_else(unknown)
    }
}

// ---------------------------------------------------------------------------
// Configuration
// ---------------------------------------------------------------------------

/// `sd = max(rel·|mean|, floor)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SdRule {
    pub rel: f64,
    pub floor: f64,
}

impl SdRule {
    pub const fn abs(sd: f64) -> Self {
        Self { rel: 0.0, floor: sd }
    }

    pub const fn rel(rel: f64, floor: f64) -> Self {
        Self { rel, floor }
    }

    pub fn sd(&self, mean: f64) -> f64 {
        (self.rel * mean.abs()).max(self.floor)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct LikelihoodSds {
    pub fade: SdRule,
    pub lambda: SdRule,
    pub temperature: SdRule,
    pub temp_prior: SdRule,
    pub accel: SdRule,
    pub accel_prior: SdRule,
    pub velocity: SdRule,
    pub vel_prior: SdRule,
    pub amp_hours: SdRule,
    /// Requested SOC sd; capped at `soc_cap·√(m(1−m))`.
    pub soc: f64,
    pub soc_cap: f64,
    pub battery_power: SdRule,
    pub wheel_power: SdRule,
}

impl Default for LikelihoodSds {
    fn default() -> Self {
        Self {
            fade: SdRule::abs(0.5),
            lambda: SdRule::rel(0.4, 0.05),
            temperature: SdRule::abs(2.0),
            temp_prior: SdRule::abs(10.0),
            accel: SdRule::abs(0.3),
            accel_prior: SdRule::abs(0.5),
            velocity: SdRule::rel(1.0, 0.1),
            vel_prior: SdRule::rel(0.25, 0.5),
            amp_hours: SdRule::rel(0.2, 1e-6),
            soc: 0.05,
            soc_cap: 0.9,
            battery_power: SdRule::rel(0.05, 0.01),
            wheel_power: SdRule::rel(0.05, 1.0),
        }
    }
}

impl LikelihoodSds {
    pub fn soc_sd(&self, mean: f64) -> f64 {
        self.soc.min(self.soc_cap * (mean * (1.0 - mean)).sqrt())
    }
}

/// Where the C-rate's Rayleigh factor puts `y`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum RayleighAnchor {
    /// `y` is the mode (the Rayleigh scale).
    #[default]
    Mode,
    /// `y` is the mean.
    Mean,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PriorConfig {
    pub alpha: DistSpec,
    pub beta: DistSpec,
    pub activation_energy: DistSpec,
    pub eta: DistSpec,
    pub zeta: DistSpec,
    pub epsilon: DistSpec,
    pub efficiency: DistSpec,
    pub voltage: DistSpec,
    /// Auxiliary power prior as fractions of the unit's reference driving power.
    pub aux_fraction: f64,
    pub aux_fraction_sd: f64,
    /// Priors of `k`, `γ`, `ω`, `φ` are centred on their initial values with
    /// these relative sds.
    pub k_rel_sd: f64,
    pub k_floor: f64,
    pub mass_rel_sd: f64,
    pub aero_rel_sd: f64,
    pub rolling_rel_sd: f64,
}

impl Default for PriorConfig {
    fn default() -> Self {
        Self {
            alpha: DistSpec::normal(0.0, 20_000.0),
            beta: DistSpec::gamma(30_000.0, 20_000.0),
            activation_energy: DistSpec::gamma(31_000.0, 2_000.0),
            eta: DistSpec::normal(0.0, 500.0),
            zeta: DistSpec::gamma(0.5, 0.1),
            epsilon: DistSpec::normal(0.0, 1.0),
            efficiency: DistSpec::beta(0.9, 0.05),
            voltage: DistSpec::gamma(3.3, 0.2),
            aux_fraction: 0.10,
            aux_fraction_sd: 0.025,
            k_rel_sd: 0.25,
            k_floor: 0.01,
            mass_rel_sd: 0.1,
            aero_rel_sd: 0.2,
            rolling_rel_sd: 0.2,
        }
    }
}

impl PriorConfig {
    pub fn resolve(&self, init: &ParameterSet) -> ParameterPriors {
        let rel = |mean: f64, rel_sd: f64| DistSpec::gamma(mean, rel_sd * mean);
        let k = std::array::from_fn(|n| {
            let mean = init.k[n].max(self.k_floor);
            rel(mean, self.k_rel_sd)
        });
        ParameterPriors {
            alpha: self.alpha,
            beta: self.beta,
            activation_energy: self.activation_energy,
            eta: self.eta,
            zeta: self.zeta,
            epsilon: self.epsilon,
            k,
            mass: rel(init.mass, self.mass_rel_sd),
            aero: rel(init.aero, self.aero_rel_sd),
            rolling: rel(init.rolling.max(1e-3), self.rolling_rel_sd),
            efficiency: self.efficiency,
        }
    }
}

/// Concrete prior density of every global variable.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ParameterPriors {
    pub alpha: DistSpec,
    pub beta: DistSpec,
    pub activation_energy: DistSpec,
    pub eta: DistSpec,
    pub zeta: DistSpec,
    pub epsilon: DistSpec,
    pub k: [DistSpec; TASK_COUNT],
    pub mass: DistSpec,
    pub aero: DistSpec,
    pub rolling: DistSpec,
    pub efficiency: DistSpec,
}

impl ParameterPriors {
    pub fn get(&self, kind: ParamKind) -> &DistSpec {
        match kind {
            ParamKind::Alpha => &self.alpha,
            ParamKind::Beta => &self.beta,
            ParamKind::ActivationEnergy => &self.activation_energy,
            ParamKind::Eta => &self.eta,
            ParamKind::Zeta => &self.zeta,
            ParamKind::Epsilon => &self.epsilon,
            ParamKind::K(n) => &self.k[n as usize - 1],
            ParamKind::Mass => &self.mass,
            ParamKind::Aero => &self.aero,
            ParamKind::Rolling => &self.rolling,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ModelConfig {
    pub gas_constant: f64,
    /// Cell nominal capacity (Ah).
    pub nominal_capacity: f64,
    pub rayleigh_anchor: RayleighAnchor,
    /// Standstill velocity samples are floored here to stay in the gamma support.
    pub velocity_floor: f64,
    pub sds: LikelihoodSds,
    pub priors: PriorConfig,
}

impl Default for ModelConfig {
    fn default() -> Self {
        Self {
            gas_constant: GAS_CONSTANT,
            nominal_capacity: 2.3,
            rayleigh_anchor: RayleighAnchor::Mode,
            velocity_floor: 0.1,
            sds: LikelihoodSds::default(),
            priors: PriorConfig::default(),
        }
    }
}

impl ModelConfig {
    pub fn validate(&self) -> Result<(), ModelError> {
        if !(self.nominal_capacity > 0.0) {
            return Err(domain("nominal capacity must be positive"));
        }
        if !(self.gas_constant > 0.0) {
            return Err(domain("gas constant must be positive"));
        }
        Ok(())
    }

    /// Rayleigh spec of `Ic` given `y`.
    pub fn crate_spec(&self, y: f64) -> DistSpec {
        match self.rayleigh_anchor {
            RayleighAnchor::Mode => DistSpec::rayleigh(y * (std::f64::consts::PI / 2.0).sqrt()),
            RayleighAnchor::Mean => DistSpec::rayleigh(y),
        }
    }
}

// ---------------------------------------------------------------------------
// Deterministic sub-models
// ---------------------------------------------------------------------------

/// Fade-law mean with an explicit gas constant.
pub fn fade_mean(
    params: &ParameterSet,
    soc: f64,
    ic: f64,
    t: f64,
    ah: f64,
    gas_constant: f64,
) -> Result<f64, ModelError> {
    if !(t > 0.0) {
        return Err(domain(format!("temperature must be positive kelvin, got {t}")));
    }
    if !(ah >= 0.0) {
        return Err(domain(format!("Ah throughput must be non-negative, got {ah}")));
    }
    let arrhenius = (-(params.activation_energy - params.eta * ic) / (gas_constant * t)).exp();
    Ok((params.alpha * soc + params.beta) * arrhenius * ah.powf(params.zeta) + params.epsilon)
}

/// `f = (α·SOC + β)·exp(−(Ea − η·Ic)/(R·T))·Ah^ζ + ε`
pub fn fade_mean_f(params: &ParameterSet, soc: f64, ic: f64, t: f64, ah: f64) -> Result<f64, ModelError> {
    fade_mean(params, soc, ic, t, ah, GAS_CONSTANT)
}

/// `y = |Pb| / u`, expressed as a C-rate.
pub fn current_y(pb: f64, u: f64, nominal_capacity: f64) -> Result<f64, ModelError> {
    if !(u > 0.0) {
        return Err(domain(format!("voltage must be positive, got {u}")));
    }
    Ok(pb.abs() / u / nominal_capacity)
}

/// `g = k1·(Pw/δ + Paux) + Σ_{n=2..7} k_n·Pg[n]`
pub fn battery_power_g(
    params: &ParameterSet,
    pw: f64,
    paux: f64,
    delta: f64,
    grid_powers: &GridPowers,
) -> Result<f64, ModelError> {
    if !(delta > 0.0 && delta <= 1.0) {
        return Err(domain(format!("efficiency must lie in (0, 1], got {delta}")));
    }
    let tasks: f64 = (2..=TASK_COUNT).map(|n| params.k[n - 1] * grid_powers.get(n)).sum();
    Ok(params.k[0] * (pw / delta + paux) + tasks)
}

/// `h = γ·â·v̂ + ω·v̂³ + φ·v̂`
pub fn wheel_power_h(params: &ParameterSet, a_hat: f64, v_hat: f64) -> Result<f64, ModelError> {
    if !(v_hat >= 0.0) {
        return Err(domain(format!("velocity must be non-negative, got {v_hat}")));
    }
    Ok(params.mass * a_hat * v_hat + params.aero * v_hat.powi(3) + params.rolling * v_hat)
}

pub(crate) fn mean(values: &[f64]) -> f64 {
    values.iter().sum::<f64>() / values.len() as f64
}

/// Log-density that maps invalid moments to `-inf`.
#[inline]
fn lp(spec: DistSpec, x: f64) -> f64 {
    spec.log_pdf(x).unwrap_or(f64::NEG_INFINITY)
}

fn finite_or_neg_inf(x: Result<f64, ModelError>) -> Option<f64> {
    x.ok().filter(|v| v.is_finite())
}

/// Latents of one unit computed by a deterministic pass through the network
/// at the given parameters: estimates from sample means, powers from the
/// sub-models, C-rate from `y`, and Ah/SOC from the duty maps.
pub fn deterministic_latents(
    obs: &Observation,
    params: &ParameterSet,
    efficiency: f64,
    cfg: &ModelConfig,
) -> Result<UnitLatent, ModelError> {
    let temp_hat = mean(&obs.temperature);
    let (accel_hat, vel_hat, wheel_power, aux_power) = if obs.has_drive() {
        let a = mean(&obs.accel);
        let v = drive_velocity_mean(obs, cfg);
        let pw = wheel_power_h(params, a, v)?;
        (a, v, pw, cfg.priors.aux_fraction * obs.aux_reference_power)
    } else {
        (0.0, 0.0, 0.0, 0.0)
    };
    let voltage = cfg.priors.voltage.mean;
    let g = battery_power_g(params, wheel_power, aux_power, efficiency, &obs.grid_powers)?;
    let battery_power = g / obs.cells;
    let c_rate = current_y(battery_power, voltage, cfg.nominal_capacity)?.max(1e-6);
    let amp_hours = obs.duty.ah_mean(c_rate);
    let soc = obs.duty.soc_mean(c_rate);
    let lambda = match obs.fade_mean() {
        Some(q) => q.max(0.01),
        None => fade_mean(params, soc, c_rate, temp_hat, amp_hours, cfg.gas_constant)
            .unwrap_or(0.01)
            .max(0.01),
    };
    Ok(UnitLatent {
        lambda,
        temp_hat,
        c_rate,
        amp_hours,
        soc,
        voltage,
        battery_power,
        wheel_power,
        aux_power,
        accel_hat,
        vel_hat,
    })
}

fn drive_velocity_mean(obs: &Observation, cfg: &ModelConfig) -> f64 {
    let m = obs.velocity.iter().map(|v| v.max(cfg.velocity_floor)).sum::<f64>() / obs.velocity.len() as f64;
    m.max(cfg.velocity_floor)
}

// ---------------------------------------------------------------------------
// The network
// ---------------------------------------------------------------------------

/// Per-unit constants derived once from the data.
#[derive(Debug, Clone)]
struct UnitContext {
    temp_prior_mean: f64,
    accel_prior_mean: f64,
    vel_prior_mean: f64,
    velocity: Vec<f64>,
    aux_prior: DistSpec,
}

/// Replayed global variables: at iteration `r` each takes sample `r` (cycled)
/// of a previously drawn chain instead of being sampled.
#[derive(Debug, Clone, Default)]
pub struct Replay {
    pub series: Vec<(VarId, Vec<f64>)>,
}

/// Observations, configuration and the mutable state the sampler walks.
#[derive(Debug, Clone)]
pub struct Network<'a> {
    data: &'a ObservationSet,
    cfg: &'a ModelConfig,
    pub priors: ParameterPriors,
    pub state: LatentState,
    pub params: ParameterSet,
    ctx: Vec<UnitContext>,
    replay: Replay,
}

impl<'a> Network<'a> {
    pub fn new(
        data: &'a ObservationSet,
        cfg: &'a ModelConfig,
        state: LatentState,
        params: ParameterSet,
        priors: ParameterPriors,
    ) -> Result<Self, ModelError> {
        cfg.validate()?;
        data.validate()?;
        params.validate()?;
        if state.units.len() != data.len() {
            return Err(ModelError::InvalidState(format!(
                "{} latent units for {} observations",
                state.units.len(),
                data.len()
            )));
        }
        let ctx = data
            .observations
            .iter()
            .map(|obs| {
                let aux_mean = cfg.priors.aux_fraction * obs.aux_reference_power;
                let aux_sd = cfg.priors.aux_fraction_sd * obs.aux_reference_power;
                UnitContext {
                    temp_prior_mean: mean(&obs.temperature),
                    accel_prior_mean: if obs.has_drive() { mean(&obs.accel) } else { 0.0 },
                    vel_prior_mean: if obs.has_drive() { drive_velocity_mean(obs, cfg) } else { 0.0 },
                    velocity: obs.velocity.iter().map(|v| v.max(cfg.velocity_floor)).collect(),
                    aux_prior: DistSpec::gamma(aux_mean, aux_sd),
                }
            })
            .collect();
        let net = Self { data, cfg, priors, state, params, ctx, replay: Replay::default() };
        for u in &net.state.units {
            let ok = u.lambda >= 0.0
                && u.amp_hours >= 0.0
                && u.voltage > 0.0
                && u.vel_hat >= 0.0
                && u.c_rate >= 0.0
                && u.soc > 0.0
                && u.soc < 1.0;
            if !ok {
                return Err(ModelError::InvalidState(format!("latent support violated: {u:?}")));
            }
        }
        if !(net.state.efficiency > 0.0 && net.state.efficiency < 1.0) {
            return Err(ModelError::InvalidState("efficiency must lie in (0, 1)".into()));
        }
        Ok(net)
    }

    pub fn data(&self) -> &ObservationSet {
        self.data
    }

    pub fn config(&self) -> &ModelConfig {
        self.cfg
    }

    pub fn set_replay(&mut self, replay: Replay) {
        self.replay = replay;
    }

    pub fn replayed(&self, var: VarId) -> bool {
        self.replay.series.iter().any(|(v, _)| *v == var)
    }

    /// Applies sample `iteration` (cycled) of every replayed series.
    pub fn apply_replay(&mut self, iteration: usize) {
        let updates: Vec<(VarId, f64)> = self
            .replay
            .series
            .iter()
            .filter(|(_, s)| !s.is_empty())
            .map(|(v, s)| (*v, s[iteration % s.len()]))
            .collect();
        for (var, x) in updates {
            let _ = self.set(var, x);
        }
    }

    /// Every node in sweep order: unit latents first, then `δ`, then parameters.
    pub fn nodes(&self) -> Vec<VarId> {
        let mut out = Vec::new();
        for (i, obs) in self.data.observations.iter().enumerate() {
            for kind in LatentKind::ALL {
                if !kind.is_drive() || obs.has_drive() {
                    out.push(VarId::Latent(i, kind));
                }
            }
        }
        out.push(VarId::Efficiency);
        out.extend(ParamKind::all().into_iter().map(VarId::Param));
        out
    }

    /// Nodes the sampler visits (replayed ones excluded).
    pub fn sampled_nodes(&self) -> Vec<VarId> {
        self.nodes().into_iter().filter(|v| !self.replayed(*v)).collect()
    }

    fn check(&self, var: VarId) -> Result<(), ModelError> {
        if let VarId::Latent(i, kind) = var {
            let obs = self
                .data
                .observations
                .get(i)
                .ok_or_else(|| ModelError::UnknownVariable(var.to_string()))?;
            if kind.is_drive() && !obs.has_drive() {
                return Err(ModelError::UnknownVariable(var.to_string()));
            }
        }
        Ok(())
    }

    pub fn get(&self, var: VarId) -> Result<f64, ModelError> {
        self.check(var)?;
        Ok(match var {
            VarId::Latent(i, kind) => kind.get(&self.state.units[i]),
            VarId::Efficiency => self.state.efficiency,
            VarId::Param(p) => self.params.get(p),
        })
    }

    pub fn set(&mut self, var: VarId, x: f64) -> Result<(), ModelError> {
        self.check(var)?;
        match var {
            VarId::Latent(i, kind) => *kind.slot(&mut self.state.units[i]) = x,
            VarId::Efficiency => self.state.efficiency = x,
            VarId::Param(p) => self.params.set(p, x),
        }
        Ok(())
    }

    // ---- per-unit deterministic means -------------------------------------

    pub fn fade_mean_at(&self, i: usize) -> Result<f64, ModelError> {
        let u = &self.state.units[i];
        fade_mean(&self.params, u.soc, u.c_rate, u.temp_hat, u.amp_hours, self.cfg.gas_constant)
    }

    fn y_at(&self, i: usize) -> Result<f64, ModelError> {
        let u = &self.state.units[i];
        current_y(u.battery_power, u.voltage, self.cfg.nominal_capacity)
    }

    fn g_at(&self, i: usize) -> Result<f64, ModelError> {
        let u = &self.state.units[i];
        let obs = &self.data.observations[i];
        let (pw, paux) = if obs.has_drive() { (u.wheel_power, u.aux_power) } else { (0.0, 0.0) };
        Ok(battery_power_g(&self.params, pw, paux, self.state.efficiency, &obs.grid_powers)? / obs.cells)
    }

    fn h_at(&self, i: usize) -> Result<f64, ModelError> {
        let u = &self.state.units[i];
        wheel_power_h(&self.params, u.accel_hat, u.vel_hat)
    }

    // ---- factors ------------------------------------------------------------

    /// `Σ_j log N(q_ij | λ_i)`
    pub fn factor_fade_obs(&self, i: usize) -> f64 {
        let lambda = self.state.units[i].lambda;
        let sd = self.cfg.sds.fade.sd(lambda);
        self.data.observations[i].fade.iter().map(|q| lp(DistSpec::normal(lambda, sd), *q)).sum()
    }

    /// `log G(λ_i | f_i)`
    pub fn factor_lambda(&self, i: usize) -> f64 {
        match finite_or_neg_inf(self.fade_mean_at(i)) {
            Some(f) if f > 0.0 => {
                lp(DistSpec::gamma(f, self.cfg.sds.lambda.sd(f)), self.state.units[i].lambda)
            }
            _ => f64::NEG_INFINITY,
        }
    }

    /// `Σ_m log N(T_im | T̂_i)`
    pub fn factor_temp_obs(&self, i: usize) -> f64 {
        let t_hat = self.state.units[i].temp_hat;
        let spec = DistSpec::normal(t_hat, self.cfg.sds.temperature.sd(t_hat));
        self.data.observations[i].temperature.iter().map(|t| lp(spec, *t)).sum()
    }

    /// `log [T̂_i]`
    pub fn factor_temp_prior(&self, i: usize) -> f64 {
        let m = self.ctx[i].temp_prior_mean;
        lp(DistSpec::normal(m, self.cfg.sds.temp_prior.sd(m)), self.state.units[i].temp_hat)
    }

    /// `Σ_k log N(a_ik | â_i)`
    pub fn factor_accel_obs(&self, i: usize) -> f64 {
        let a_hat = self.state.units[i].accel_hat;
        let spec = DistSpec::normal(a_hat, self.cfg.sds.accel.sd(a_hat));
        self.data.observations[i].accel.iter().map(|a| lp(spec, *a)).sum()
    }

    pub fn factor_accel_prior(&self, i: usize) -> f64 {
        let m = self.ctx[i].accel_prior_mean;
        lp(DistSpec::normal(m, self.cfg.sds.accel_prior.sd(m)), self.state.units[i].accel_hat)
    }

    /// `Σ_k log G(v_ik | v̂_i)`
    pub fn factor_vel_obs(&self, i: usize) -> f64 {
        let v_hat = self.state.units[i].vel_hat;
        let spec = DistSpec::gamma(v_hat, self.cfg.sds.velocity.sd(v_hat));
        match spec.native_params() {
            Ok(native) => self.ctx[i]
                .velocity
                .iter()
                .map(|v| crate::dist::log_pdf_native(&native, *v))
                .sum(),
            Err(_) => f64::NEG_INFINITY,
        }
    }

    pub fn factor_vel_prior(&self, i: usize) -> f64 {
        let m = self.ctx[i].vel_prior_mean;
        lp(DistSpec::gamma(m, self.cfg.sds.vel_prior.sd(m)), self.state.units[i].vel_hat)
    }

    /// `log G(Ah_i | Ic_i)`
    pub fn factor_amp_hours(&self, i: usize) -> f64 {
        let u = &self.state.units[i];
        let m = self.data.observations[i].duty.ah_mean(u.c_rate);
        lp(DistSpec::gamma(m, self.cfg.sds.amp_hours.sd(m)), u.amp_hours)
    }

    /// `log B(SOC_i | Ic_i)`
    pub fn factor_soc(&self, i: usize) -> f64 {
        let u = &self.state.units[i];
        let m = self.data.observations[i].duty.soc_mean(u.c_rate);
        lp(DistSpec::beta(m, self.cfg.sds.soc_sd(m)), u.soc)
    }

    /// `log R(Ic_i | y_i)`
    pub fn factor_c_rate(&self, i: usize) -> f64 {
        match finite_or_neg_inf(self.y_at(i)) {
            Some(y) if y > 0.0 => lp(self.cfg.crate_spec(y), self.state.units[i].c_rate),
            _ => f64::NEG_INFINITY,
        }
    }

    /// `log [u_i]`
    pub fn factor_voltage(&self, i: usize) -> f64 {
        lp(self.cfg.priors.voltage, self.state.units[i].voltage)
    }

    /// `log N(Pb_i | g_i)`
    pub fn factor_battery_power(&self, i: usize) -> f64 {
        match finite_or_neg_inf(self.g_at(i)) {
            Some(g) => lp(
                DistSpec::normal(g, self.cfg.sds.battery_power.sd(g)),
                self.state.units[i].battery_power,
            ),
            None => f64::NEG_INFINITY,
        }
    }

    /// `log [Paux_i]`
    pub fn factor_aux_power(&self, i: usize) -> f64 {
        lp(self.ctx[i].aux_prior, self.state.units[i].aux_power)
    }

    /// `log N(Pw_i | h_i)`
    pub fn factor_wheel_power(&self, i: usize) -> f64 {
        match finite_or_neg_inf(self.h_at(i)) {
            Some(h) => lp(
                DistSpec::normal(h, self.cfg.sds.wheel_power.sd(h)),
                self.state.units[i].wheel_power,
            ),
            None => f64::NEG_INFINITY,
        }
    }

    pub fn factor_efficiency(&self) -> f64 {
        lp(self.priors.efficiency, self.state.efficiency)
    }

    pub fn factor_param_prior(&self, kind: ParamKind) -> f64 {
        lp(*self.priors.get(kind), self.params.get(kind))
    }

    fn driving_units(&self) -> impl Iterator<Item = usize> + '_ {
        self.data
            .observations
            .iter()
            .enumerate()
            .filter(|(_, o)| o.has_drive())
            .map(|(i, _)| i)
    }

    fn sum_units(&self, f: impl Fn(usize) -> f64) -> f64 {
        let mut acc = 0.0;
        for i in 0..self.data.len() {
            acc += f(i);
            if acc == f64::NEG_INFINITY {
                break;
            }
        }
        acc
    }

    /// Sum of the log factors that contain `var`.
    pub fn log_full_conditional(&self, var: VarId) -> Result<f64, ModelError> {
        self.check(var)?;
        Ok(match var {
            VarId::Latent(i, kind) => match kind {
                LatentKind::Lambda => self.factor_fade_obs(i) + self.factor_lambda(i),
                LatentKind::TempHat => {
                    self.factor_lambda(i) + self.factor_temp_obs(i) + self.factor_temp_prior(i)
                }
                LatentKind::CRate => {
                    self.factor_lambda(i)
                        + self.factor_amp_hours(i)
                        + self.factor_soc(i)
                        + self.factor_c_rate(i)
                }
                LatentKind::AmpHours => self.factor_lambda(i) + self.factor_amp_hours(i),
                LatentKind::Soc => self.factor_lambda(i) + self.factor_soc(i),
                LatentKind::Voltage => self.factor_c_rate(i) + self.factor_voltage(i),
                LatentKind::BatteryPower => self.factor_c_rate(i) + self.factor_battery_power(i),
                LatentKind::WheelPower => self.factor_battery_power(i) + self.factor_wheel_power(i),
                LatentKind::AuxPower => self.factor_battery_power(i) + self.factor_aux_power(i),
                LatentKind::AccelHat => {
                    self.factor_accel_obs(i) + self.factor_accel_prior(i) + self.factor_wheel_power(i)
                }
                LatentKind::VelHat => {
                    self.factor_vel_obs(i) + self.factor_vel_prior(i) + self.factor_wheel_power(i)
                }
            },
            VarId::Efficiency => {
                self.sum_units(|i| self.factor_battery_power(i)) + self.factor_efficiency()
            }
            VarId::Param(p) => {
                let prior = self.factor_param_prior(p);
                let data = match p {
                    ParamKind::Alpha
                    | ParamKind::Beta
                    | ParamKind::ActivationEnergy
                    | ParamKind::Eta
                    | ParamKind::Zeta
                    | ParamKind::Epsilon => self.sum_units(|i| self.factor_lambda(i)),
                    ParamKind::K(_) => self.sum_units(|i| self.factor_battery_power(i)),
                    ParamKind::Mass | ParamKind::Aero | ParamKind::Rolling => {
                        self.driving_units().map(|i| self.factor_wheel_power(i)).sum()
                    }
                };
                prior + data
            }
        })
    }

    /// Sum of every factor of the unnormalized log posterior.
    pub fn log_joint(&self) -> f64 {
        let mut total = 0.0;
        for (i, obs) in self.data.observations.iter().enumerate() {
            total += self.factor_fade_obs(i)
                + self.factor_lambda(i)
                + self.factor_temp_obs(i)
                + self.factor_temp_prior(i)
                + self.factor_amp_hours(i)
                + self.factor_soc(i)
                + self.factor_c_rate(i)
                + self.factor_voltage(i)
                + self.factor_battery_power(i);
            if obs.has_drive() {
                total += self.factor_accel_obs(i)
                    + self.factor_accel_prior(i)
                    + self.factor_vel_obs(i)
                    + self.factor_vel_prior(i)
                    + self.factor_aux_power(i)
                    + self.factor_wheel_power(i);
            }
        }
        total += self.factor_efficiency();
        for p in ParamKind::all() {
            total += self.factor_param_prior(p);
        }
        total
    }

    /// SD of the density that generates `var`, at the current state.
    pub fn prior_sd(&self, var: VarId) -> Result<f64, ModelError> {
        self.check(var)?;
        let sds = &self.cfg.sds;
        let sd = match var {
            VarId::Latent(i, kind) => {
                let u = &self.state.units[i];
                let obs = &self.data.observations[i];
                match kind {
                    LatentKind::Lambda => sds.lambda.sd(self.fade_mean_at(i).unwrap_or(u.lambda)),
                    LatentKind::TempHat => sds.temp_prior.sd(self.ctx[i].temp_prior_mean),
                    LatentKind::CRate => self
                        .cfg
                        .crate_spec(self.y_at(i).unwrap_or(u.c_rate).max(1e-9))
                        .effective_sd()
                        .unwrap_or(u.c_rate),
                    LatentKind::AmpHours => sds.amp_hours.sd(obs.duty.ah_mean(u.c_rate)),
                    LatentKind::Soc => sds.soc_sd(obs.duty.soc_mean(u.c_rate)),
                    LatentKind::Voltage => self.cfg.priors.voltage.sd,
                    LatentKind::BatteryPower => sds.battery_power.sd(self.g_at(i).unwrap_or(u.battery_power)),
                    LatentKind::WheelPower => sds.wheel_power.sd(self.h_at(i).unwrap_or(u.wheel_power)),
                    LatentKind::AuxPower => self.ctx[i].aux_prior.sd,
                    LatentKind::AccelHat => sds.accel_prior.sd(self.ctx[i].accel_prior_mean),
                    LatentKind::VelHat => sds.vel_prior.sd(self.ctx[i].vel_prior_mean),
                }
            }
            VarId::Efficiency => self.priors.efficiency.sd,
            VarId::Param(p) => self.priors.get(p).sd,
        };
        Ok(sd)
    }

    /// Default proposal sds: a fraction of each latent's generating sd and
    /// fixed per-parameter values, clipped to the prior sd.
    pub fn default_tuning(&self, tuning: &TuningDefaults) -> Vec<(VarId, f64)> {
        self.sampled_nodes()
            .into_iter()
            .map(|var| {
                let prior = self.prior_sd(var).unwrap_or(1.0);
                let sd = match var {
                    VarId::Latent(_, kind) => tuning.latent_fraction(kind) * prior,
                    VarId::Efficiency => tuning.efficiency,
                    VarId::Param(p) => tuning.param(p, self.params.get(p)),
                };
                (var, sd.min(prior))
            })
            .collect()
    }
}

/// Fixed proposal-sd defaults.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TuningDefaults {
    pub lambda: f64,
    pub temp_hat: f64,
    pub amp_hours: f64,
    pub soc: f64,
    pub voltage: f64,
    pub battery_power: f64,
    pub wheel_power: f64,
    pub aux_power: f64,
    pub accel_hat: f64,
    pub vel_hat: f64,
    pub efficiency: f64,
    pub alpha: f64,
    pub beta: f64,
    pub activation_energy: f64,
    pub eta: f64,
    pub zeta: f64,
    pub epsilon: f64,
    /// Relative to the current value.
    pub k_rel: f64,
    pub vehicle_rel: f64,
}

impl Default for TuningDefaults {
    fn default() -> Self {
        Self {
            lambda: 0.5,
            temp_hat: 0.2,
            amp_hours: 0.5,
            soc: 0.5,
            voltage: 0.5,
            battery_power: 0.5,
            wheel_power: 0.5,
            aux_power: 0.5,
            accel_hat: 0.1,
            vel_hat: 0.1,
            efficiency: 0.01,
            alpha: 15_000.0,
            beta: 8_000.0,
            activation_energy: 800.0,
            eta: 250.0,
            zeta: 0.05,
            epsilon: 0.8,
            k_rel: 0.02,
            vehicle_rel: 0.02,
        }
    }
}

impl TuningDefaults {
    fn latent_fraction(&self, kind: LatentKind) -> f64 {
        match kind {
            LatentKind::Lambda => self.lambda,
            LatentKind::TempHat => self.temp_hat,
            // the Rayleigh kernel has no width parameter
            LatentKind::CRate => 1.0,
            LatentKind::AmpHours => self.amp_hours,
            LatentKind::Soc => self.soc,
            LatentKind::Voltage => self.voltage,
            LatentKind::BatteryPower => self.battery_power,
            LatentKind::WheelPower => self.wheel_power,
            LatentKind::AuxPower => self.aux_power,
            LatentKind::AccelHat => self.accel_hat,
            LatentKind::VelHat => self.vel_hat,
        }
    }

    fn param(&self, kind: ParamKind, value: f64) -> f64 {
        match kind {
            ParamKind::Alpha => self.alpha,
            ParamKind::Beta => self.beta,
            ParamKind::ActivationEnergy => self.activation_energy,
            ParamKind::Eta => self.eta,
            ParamKind::Zeta => self.zeta,
            ParamKind::Epsilon => self.epsilon,
            ParamKind::K(_) => self.k_rel * value.abs().max(1e-3),
            ParamKind::Mass | ParamKind::Aero | ParamKind::Rolling => {
                self.vehicle_rel * value.abs().max(1e-3)
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn params() -> ParameterSet {
        ParameterSet {
            alpha: 0.0,
            beta: 1.0,
            activation_energy: 31_000.0,
            eta: 0.0,
            zeta: 0.5,
            epsilon: 0.0,
            k: [1.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0],
            mass: 1500.0,
            aero: 0.4,
            rolling: 150.0,
        }
    }

    #[test]
    fn fade_mean_examples() {
        let mut p = params();
        p.epsilon = 0.7;
        assert_eq!(fade_mean_f(&p, 0.5, 2.0, 300.0, 0.0).unwrap(), 0.7);
        let p = params();
        // independent evaluation: exp(-31000 / (8.314 * 298.15))
        let f = fade_mean_f(&p, 0.3, 1.0, 298.15, 1.0).unwrap();
        assert!((f - 3.704_527_074_764_382e-6).abs() < 1e-15);
        let f1 = fade_mean_f(&p, 0.3, 1.0, 298.15, 100.0).unwrap();
        let f2 = fade_mean_f(&p, 0.3, 1.0, 298.15, 200.0).unwrap();
        assert!((f2 / f1 - 2f64.sqrt()).abs() < 1e-12);
        assert!(fade_mean_f(&p, 0.3, 1.0, 0.0, 1.0).is_err());
        assert!(fade_mean_f(&p, 0.3, 1.0, 298.0, -1.0).is_err());
    }

    #[test]
    fn current_examples() {
        assert!((current_y(1000.0, 250.0, 2.3).unwrap() - 4.0 / 2.3).abs() < 1e-12);
        assert_eq!(current_y(0.0, 250.0, 2.3).unwrap(), 0.0);
        assert!((current_y(-575.0, 250.0, 2.3).unwrap() - 1.0).abs() < 1e-12);
        assert!(current_y(10.0, 0.0, 2.3).is_err());
    }

    #[test]
    fn battery_power_examples() {
        let mut p = params();
        assert_eq!(battery_power_g(&p, 1234.0, 0.0, 1.0, &GridPowers::default()).unwrap(), 1234.0);
        p.k = [0.0, 1.0, 0.0, 0.0, 0.0, 0.0, 0.0];
        let mut pg = GridPowers::default();
        pg.set(2, 3300.0);
        assert_eq!(battery_power_g(&p, 9000.0, 900.0, 0.9, &pg).unwrap(), 3300.0);
        p.k = [0.286, 0.0, 0.18, 0.0, 0.0, 0.0, 0.0];
        let mut pg = GridPowers::default();
        pg.set(3, 6600.0);
        let g = battery_power_g(&p, 9000.0, 900.0, 0.9, &pg).unwrap();
        assert!((g - 4305.4).abs() < 1e-9);
        assert!(battery_power_g(&p, 1.0, 0.0, 0.0, &pg).is_err());
        assert!(battery_power_g(&p, 1.0, 0.0, 1.2, &pg).is_err());
    }

    #[test]
    fn wheel_power_examples() {
        let p = params();
        assert_eq!(wheel_power_h(&p, 3.0, 0.0).unwrap(), 0.0);
        assert!((wheel_power_h(&p, 1.0, 10.0).unwrap() - 16_900.0).abs() < 1e-9);
        assert!((wheel_power_h(&p, -1.0, 10.0).unwrap() + 13_100.0).abs() < 1e-9);
        assert!(wheel_power_h(&p, 1.0, -0.1).is_err());
    }

    #[test]
    fn var_ids_round_trip() {
        let vars = [
            VarId::Latent(3, LatentKind::Lambda),
            VarId::Latent(0, LatentKind::VelHat),
            VarId::Efficiency,
            VarId::Param(ParamKind::K(7)),
            VarId::Param(ParamKind::ActivationEnergy),
            VarId::Param(ParamKind::Rolling),
        ];
        for v in vars {
            assert_eq!(v.to_string().parse::<VarId>().unwrap(), v);
        }
        assert!("nope".parse::<VarId>().is_err());
        assert!("lambda[x]".parse::<VarId>().is_err());
    }

    #[test]
    fn cycling_duty_reproduces_average_soc() {
        for (min, max, avg) in [(0.226, 0.5, 0.385), (0.325, 0.54, 0.419), (0.114, 1.0, 0.534)] {
            let duty = Duty::cycling(3.0, min, max, avg, 1000.0);
            let soc = duty.soc_mean(3.0);
            assert!((soc - avg.min(0.99)).abs() < 1e-9, "{soc} vs {avg}");
            assert_eq!(duty.ah_mean(3.0), 1000.0);
            assert_eq!(duty.ah_mean(1.5), 1000.0);
            let timed = Duty { fixed_throughput: false, ..duty };
            assert_eq!(timed.ah_mean(1.5), 500.0);
        }
    }

    #[test]
    fn soc_mean_respects_window() {
        let duty = Duty::cycling(1.0, 0.2, 0.8, 0.5, 10.0);
        for c in [0.01, 0.5, 1.0, 3.0, 20.0] {
            let s = duty.soc_mean(c);
            assert!((0.2..=0.8).contains(&s), "{c}: {s}");
        }
        // heavier current digs deeper into the window
        let drain = Duty {
            cycles: vec![DutyCycle {
                weight: 1.0,
                steps: vec![DutyStep { c_rate: 1.0, hours: 0.3 }, DutyStep { c_rate: 0.0, hours: 1.0 }],
            }],
            ..duty
        };
        assert!(drain.soc_mean(2.0) < drain.soc_mean(1.0));
        // 0.8 → 0.5 over 0.3 h, then flat: (0.65·0.3 + 0.5) / 1.3
        assert!((drain.soc_mean(1.0) - (0.65 * 0.3 + 0.5) / 1.3).abs() < 1e-12);
    }
}
