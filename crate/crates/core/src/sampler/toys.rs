//! One-variable targets with known answers, for validating the sampler.

use crate::dist::{DistSpec, Family};
use crate::sampler::Target;

/// Normal prior on θ with normal observations of known sd. The posterior is
/// normal with the closed form in [`ConjugateNormal::posterior`].
#[derive(Debug, Clone)]
pub struct ConjugateNormal {
    pub prior_mean: f64,
    pub prior_sd: f64,
    pub noise_sd: f64,
    pub data: Vec<f64>,
    pub theta: f64,
}

impl ConjugateNormal {
    pub fn new(prior_mean: f64, prior_sd: f64, noise_sd: f64, data: Vec<f64>) -> Self {
        Self { prior_mean, prior_sd, noise_sd, data, theta: prior_mean }
    }

    /// Analytic posterior `(mean, sd)`.
    pub fn posterior(&self) -> (f64, f64) {
        let prec = 1.0 / self.prior_sd.powi(2) + self.data.len() as f64 / self.noise_sd.powi(2);
        let sum: f64 = self.data.iter().sum();
        let mean = (self.prior_mean / self.prior_sd.powi(2) + sum / self.noise_sd.powi(2)) / prec;
        (mean, prec.sqrt().recip())
    }
}

impl Target for ConjugateNormal {
    type Var = &'static str;

    fn variables(&self) -> Vec<&'static str> {
        vec!["theta"]
    }

    fn family(&self, _: &'static str) -> Family {
        Family::Normal
    }

    fn value(&self, _: &'static str) -> f64 {
        self.theta
    }

    fn set_value(&mut self, _: &'static str, x: f64) {
        self.theta = x;
    }

    fn log_full_conditional(&self, _: &'static str) -> f64 {
        let prior = DistSpec::normal(self.prior_mean, self.prior_sd).log_pdf(self.theta).unwrap_or(f64::NEG_INFINITY);
        let lik = DistSpec::normal(self.theta, self.noise_sd);
        prior + self.data.iter().map(|x| lik.log_pdf(*x).unwrap_or(f64::NEG_INFINITY)).sum::<f64>()
    }

    fn prior_sd(&self, _: &'static str) -> Option<f64> {
        Some(self.prior_sd)
    }
}

/// A fixed density sampled with kernels of its own family. With gamma or beta
/// kernels the proposal is asymmetric, so this exercises the Hastings term.
#[derive(Debug, Clone)]
pub struct FixedDensity {
    pub density: DistSpec,
    pub x: f64,
}

impl FixedDensity {
    pub fn new(density: DistSpec) -> Self {
        Self { density, x: density.mean }
    }
}

impl Target for FixedDensity {
    type Var = &'static str;

    fn variables(&self) -> Vec<&'static str> {
        vec!["x"]
    }

    fn family(&self, _: &'static str) -> Family {
        self.density.family
    }

    fn value(&self, _: &'static str) -> f64 {
        self.x
    }

    fn set_value(&mut self, _: &'static str, x: f64) {
        self.x = x;
    }

    fn log_full_conditional(&self, _: &'static str) -> f64 {
        self.density.log_pdf(self.x).unwrap_or(f64::NEG_INFINITY)
    }

    fn prior_sd(&self, _: &'static str) -> Option<f64> {
        Some(self.density.sd)
    }
}
