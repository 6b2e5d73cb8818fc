//! Metropolis-Hastings within Gibbs.
//!
//! Each sweep visits every free variable once in a fixed order. A proposal is
//! drawn from the variable's own family, centred on the current value with
//! the configured tuning sd (Rayleigh proposals are fixed by their mean).
//! Proposals are generally asymmetric, so the forward and reverse proposal
//! densities enter the acceptance ratio explicitly.
//!
//! Randomness comes from two ChaCha streams derived from one seed: stream 0
//! for proposals and stream 1 for acceptance uniforms. A run is fully
//! determined by the seed, the initial state and the configuration.

use std::collections::HashMap;
use std::fmt::Display;

use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::dist::{DistSpec, Family};
use crate::model::{
    deterministic_latents, LatentState, ModelConfig, ModelError, Network, ObservationSet,
    ParameterSet, VarId, TASK_COUNT,
};
use crate::scenario::{TaskShares, VehicleSpec};

pub mod toys;

/// Beta proposals whose variance does not fit the current mean are retried
/// with a halved sd this many times.
pub const MAX_BETA_SHRINKS: usize = 10;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum SamplerError {
    #[error("iteration count must be positive")]
    ZeroIterations,
    #[error("burn-in fraction must lie in [0, 1), got {0}")]
    InvalidBurnIn(f64),
    #[error("thinning must be positive")]
    ZeroThinning,
    #[error("no tuning sd for variable '{0}'")]
    MissingTuning(String),
    #[error("tuning sd {tuning} for '{var}' must be positive and at most the prior sd {prior}")]
    InvalidTuning { var: String, tuning: f64, prior: f64 },
    #[error("no valid proposal for '{var}' at current value {current}")]
    ProposalFailure { var: String, current: f64 },
    #[error("initial state has zero density at '{0}'")]
    InvalidInitialState(String),
    #[error(transparent)]
    Model(#[from] ModelError),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SamplerConfig {
    pub iterations: usize,
    pub burn_in_fraction: f64,
    pub thinning: usize,
    pub seed: u64,
    /// Proposal sd per variable name.
    pub tuning_sds: HashMap<String, f64>,
}

impl SamplerConfig {
    pub fn new(iterations: usize, seed: u64) -> Self {
        Self { iterations, burn_in_fraction: 0.2, thinning: 1, seed, tuning_sds: HashMap::new() }
    }

    pub fn with_tuning<V: Display>(mut self, sds: impl IntoIterator<Item = (V, f64)>) -> Self {
        self.tuning_sds.extend(sds.into_iter().map(|(v, s)| (v.to_string(), s)));
        self
    }

    fn validate(&self) -> Result<(), SamplerError> {
        if self.iterations == 0 {
            return Err(SamplerError::ZeroIterations);
        }
        if !(0.0..1.0).contains(&self.burn_in_fraction) {
            return Err(SamplerError::InvalidBurnIn(self.burn_in_fraction));
        }
        if self.thinning == 0 {
            return Err(SamplerError::ZeroThinning);
        }
        Ok(())
    }
}

/// Recorded draws of one variable.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Chain {
    pub variable: String,
    pub family: Family,
    pub samples: Vec<f64>,
    pub accepted: usize,
    pub seed: u64,
    /// Number of leading samples discarded as burn-in.
    pub burn_in: usize,
}

impl Chain {
    pub fn post_burn_in(&self) -> &[f64] {
        &self.samples[self.burn_in.min(self.samples.len())..]
    }

    /// Fraction of visits that accepted the proposal. Only meaningful
    /// without thinning, where one sample is one visit.
    pub fn acceptance_rate(&self, iterations: usize) -> f64 {
        self.accepted as f64 / iterations.max(1) as f64
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct ChainSet {
    pub chains: Vec<Chain>,
    pub iterations: usize,
}

impl ChainSet {
    pub fn get(&self, variable: &str) -> Option<&Chain> {
        self.chains.iter().find(|c| c.variable == variable)
    }
}

/// A distribution the sampler can walk one coordinate at a time.
pub trait Target {
    type Var: Copy + Display;

    /// Free variables in sweep order.
    fn variables(&self) -> Vec<Self::Var>;
    fn family(&self, var: Self::Var) -> Family;
    fn value(&self, var: Self::Var) -> f64;
    fn set_value(&mut self, var: Self::Var, x: f64);
    /// Unnormalized log full conditional; `-inf` off the support.
    fn log_full_conditional(&self, var: Self::Var) -> f64;
    /// Sd of the density generating `var`, the upper bound for its tuning sd.
    fn prior_sd(&self, _var: Self::Var) -> Option<f64> {
        None
    }
    /// Called at the start of every sweep.
    fn begin_iteration(&mut self, _iteration: usize) {}
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Proposal {
    pub value: f64,
    /// `ln q(proposed | current)`
    pub log_q_forward: f64,
    /// `ln q(current | proposed)`
    pub log_q_reverse: f64,
}

fn kernel(family: Family, centre: f64, sd: f64) -> DistSpec {
    match family {
        Family::Rayleigh => DistSpec::rayleigh(centre),
        _ => DistSpec { family, mean: centre, sd },
    }
}

/// Draws from the family centred on `current`.
///
/// Beta kernels whose variance does not fit the current mean have their sd
/// halved up to [`MAX_BETA_SHRINKS`] times; the reverse density uses the sd
/// that produced the forward draw.
pub fn propose<R: Rng + ?Sized>(
    current: f64,
    family: Family,
    tuning_sd: f64,
    rng: &mut R,
) -> Result<Proposal, (f64, &'static str)> {
    let mut sd = tuning_sd;
    let attempts = if family == Family::Beta { MAX_BETA_SHRINKS + 1 } else { 1 };
    for _ in 0..attempts {
        let forward = kernel(family, current, sd);
        if let Ok(native) = forward.native_params() {
            let value = crate::dist::draw_native(&native, rng);
            let log_q_forward = crate::dist::log_pdf_native(&native, value);
            let log_q_reverse = kernel(family, value, sd)
                .log_pdf(current)
                .unwrap_or(f64::NEG_INFINITY);
            return Ok(Proposal { value, log_q_forward, log_q_reverse });
        }
        sd *= 0.5;
    }
    Err((current, "kernel moments invalid"))
}

/// `min(1, exp(Δ log target + ln q(cur|prop) − ln q(prop|cur)))`
pub fn accept_prob(log_fc_prop: f64, log_fc_cur: f64, log_q_rev: f64, log_q_fwd: f64) -> f64 {
    if log_fc_prop == f64::NEG_INFINITY || log_q_rev == f64::NEG_INFINITY {
        return 0.0;
    }
    let log_r = (log_fc_prop - log_fc_cur) + (log_q_rev - log_q_fwd);
    if log_r.is_nan() {
        return 0.0;
    }
    log_r.min(0.0).exp()
}

/// The two independent streams of a run.
pub struct RngStreams {
    pub proposal: ChaCha8Rng,
    pub accept: ChaCha8Rng,
}

impl RngStreams {
    pub fn new(seed: u64) -> Self {
        let mut proposal = ChaCha8Rng::seed_from_u64(seed);
        proposal.set_stream(0);
        let mut accept = ChaCha8Rng::seed_from_u64(seed);
        accept.set_stream(1);
        Self { proposal, accept }
    }
}

/// One MH update of `var`. Returns whether the proposal was accepted.
pub fn mh_update<T: Target>(
    target: &mut T,
    var: T::Var,
    tuning_sd: f64,
    rngs: &mut RngStreams,
) -> Result<bool, SamplerError> {
    let current = target.value(var);
    let family = target.family(var);
    let proposal = propose(current, family, tuning_sd, &mut rngs.proposal).map_err(|(current, _)| {
        SamplerError::ProposalFailure { var: var.to_string(), current }
    })?;
    // both uniforms are consumed every visit so the streams stay aligned
    let u: f64 = rngs.accept.gen();
    let log_cur = target.log_full_conditional(var);
    target.set_value(var, proposal.value);
    let log_prop = target.log_full_conditional(var);
    let r = accept_prob(log_prop, log_cur, proposal.log_q_reverse, proposal.log_q_forward);
    if u < r {
        Ok(true)
    } else {
        target.set_value(var, current);
        Ok(false)
    }
}

/// Runs `iterations` sweeps and returns one chain per free variable.
pub fn run_mcmc<T: Target>(target: &mut T, cfg: &SamplerConfig) -> Result<ChainSet, SamplerError> {
    cfg.validate()?;
    let vars = target.variables();
    let mut tuning = Vec::with_capacity(vars.len());
    for &var in &vars {
        let name = var.to_string();
        let family = target.family(var);
        let sd = match (family, cfg.tuning_sds.get(&name)) {
            (_, Some(sd)) => *sd,
            (Family::Rayleigh, None) => 0.0,
            (_, None) => return Err(SamplerError::MissingTuning(name)),
        };
        if family != Family::Rayleigh {
            let prior = target.prior_sd(var).unwrap_or(f64::INFINITY);
            if !(sd > 0.0) || sd > prior * (1.0 + 1e-12) {
                return Err(SamplerError::InvalidTuning { var: name, tuning: sd, prior });
            }
        }
        tuning.push(sd);
    }
    target.begin_iteration(0);
    for &var in &vars {
        if !target.log_full_conditional(var).is_finite() {
            return Err(SamplerError::InvalidInitialState(var.to_string()));
        }
    }

    let recorded = cfg.iterations.div_ceil(cfg.thinning);
    let mut samples: Vec<Vec<f64>> = vars.iter().map(|_| Vec::with_capacity(recorded)).collect();
    let mut accepted = vec![0usize; vars.len()];
    let mut rngs = RngStreams::new(cfg.seed);
    for it in 0..cfg.iterations {
        if it > 0 {
            target.begin_iteration(it);
        }
        for (k, &var) in vars.iter().enumerate() {
            if mh_update(target, var, tuning[k], &mut rngs)? {
                accepted[k] += 1;
            }
        }
        if it % cfg.thinning == 0 {
            for (k, &var) in vars.iter().enumerate() {
                samples[k].push(target.value(var));
            }
        }
    }

    let burn_in = (cfg.burn_in_fraction * recorded as f64).floor() as usize;
    let chains = vars
        .iter()
        .zip(samples)
        .zip(accepted)
        .map(|((&var, samples), accepted)| Chain {
            variable: var.to_string(),
            family: target.family(var),
            samples,
            accepted,
            seed: cfg.seed,
            burn_in,
        })
        .collect();
    Ok(ChainSet { chains, iterations: cfg.iterations })
}

impl Target for Network<'_> {
    type Var = VarId;

    fn variables(&self) -> Vec<VarId> {
        self.sampled_nodes()
    }

    fn family(&self, var: VarId) -> Family {
        var.family()
    }

    fn value(&self, var: VarId) -> f64 {
        self.get(var).unwrap_or(f64::NAN)
    }

    fn set_value(&mut self, var: VarId, x: f64) {
        let _ = self.set(var, x);
    }

    fn log_full_conditional(&self, var: VarId) -> f64 {
        Network::log_full_conditional(self, var).unwrap_or(f64::NEG_INFINITY)
    }

    fn prior_sd(&self, var: VarId) -> Option<f64> {
        Network::prior_sd(self, var).ok()
    }

    fn begin_iteration(&mut self, iteration: usize) {
        self.apply_replay(iteration);
    }
}

/// Default initial values:
///
/// * `ε = 0`, `Ea = 31 kJ/mol`, `ζ = 0.5`, `α = 0`, `η = 0`;
/// * `β` solved so the first unit with fade data is matched exactly;
/// * `ω`, `φ`, `γ` from the vehicle;
/// * `k_n` from the observed task shares;
/// * latents from a deterministic pass through the network.
pub fn init_state(
    data: &ObservationSet,
    vehicle: &VehicleSpec,
    shares: &TaskShares,
    cfg: &ModelConfig,
) -> Result<(LatentState, ParameterSet), SamplerError> {
    data.validate()?;
    let mut params = ParameterSet {
        alpha: 0.0,
        beta: cfg.priors.beta.mean,
        activation_energy: 31_000.0,
        eta: 0.0,
        zeta: 0.5,
        epsilon: 0.0,
        k: std::array::from_fn(|n| shares.get(n + 1).max(cfg.priors.k_floor)),
        mass: vehicle.total_mass(),
        aero: vehicle.aero_coefficient(),
        rolling: vehicle.rolling_force(),
    };
    let efficiency = cfg.priors.efficiency.mean;
    if let Some(obs) = data.observations.iter().find(|o| !o.fade.is_empty()) {
        let unit = deterministic_latents(obs, &params, efficiency, cfg)?;
        let mut unit_beta = params;
        unit_beta.beta = 1.0;
        let per_beta = crate::model::fade_mean(
            &unit_beta,
            unit.soc,
            unit.c_rate,
            unit.temp_hat,
            unit.amp_hours,
            cfg.gas_constant,
        )?;
        let target = obs.fade_mean().unwrap_or(0.0) - params.epsilon;
        if per_beta > 0.0 && target > 0.0 {
            params.beta = target / per_beta;
        }
    }
    let units = data
        .observations
        .iter()
        .map(|obs| deterministic_latents(obs, &params, efficiency, cfg))
        .collect::<Result<Vec<_>, _>>()?;
    debug_assert_eq!(params.k.len(), TASK_COUNT);
    Ok((LatentState { units, efficiency }, params))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn accept_prob_bounds() {
        assert_eq!(accept_prob(f64::NEG_INFINITY, 0.0, 0.0, 0.0), 0.0);
        assert_eq!(accept_prob(1.0, 0.0, 0.0, 0.0), 1.0);
        assert!((accept_prob(0.0, 1.0, 0.0, 0.0) - (-1f64).exp()).abs() < 1e-15);
        // Hastings correction enters with the right sign
        assert!((accept_prob(0.0, 0.0, -1.0, 0.0) - (-1f64).exp()).abs() < 1e-15);
        assert_eq!(accept_prob(0.0, 0.0, 0.0, -1.0), 1.0);
    }

    #[test]
    fn proposals_stay_in_support() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..2000 {
            let p = propose(0.02, Family::Beta, 0.3, &mut rng).unwrap();
            assert!(p.value > 0.0 && p.value < 1.0);
            assert!(p.log_q_forward.is_finite());
            let p = propose(0.5, Family::Gamma, 2.0, &mut rng).unwrap();
            assert!(p.value > 0.0);
            let p = propose(1.0, Family::Rayleigh, 123.0, &mut rng).unwrap();
            assert!(p.value > 0.0);
        }
    }

    #[test]
    fn invalid_current_value_is_proposal_failure() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        assert!(propose(-1.0, Family::Gamma, 0.1, &mut rng).is_err());
        assert!(propose(1.5, Family::Beta, 0.1, &mut rng).is_err());
    }

    #[test]
    fn streams_are_distinct_and_reproducible() {
        let mut a = RngStreams::new(9);
        let mut b = RngStreams::new(9);
        let xa: u64 = a.proposal.gen();
        let ya: u64 = a.accept.gen();
        assert_ne!(xa, ya);
        assert_eq!(xa, b.proposal.gen::<u64>());
        assert_eq!(ya, b.accept.gen::<u64>());
    }
}
