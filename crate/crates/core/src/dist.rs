//! Moment-parameterized density kernels.
//!
//! Every density in the network is described by its family plus a mean and a
//! standard deviation. The native parameterization of each family is recovered
//! by the method of moments:
//!
//! | Family   | Native parameters                                       |
//! |----------|---------------------------------------------------------|
//! | Normal   | mean, sd                                                |
//! | Gamma    | shape = mean²/sd², rate = mean/sd²                      |
//! | Beta     | ν = mean(1−mean)/sd² − 1, α = mean·ν, β = (1−mean)·ν    |
//! | Rayleigh | scale = mean/√(π/2) (sd is carried but not used)        |
//!
//! Points outside a family's support have log-density `-inf`, which makes an
//! out-of-support proposal an automatic rejection.

use std::f64::consts::PI;
use std::fmt;
use std::str::FromStr;

use rand::Rng;
use rand_distr::Distribution;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::special::{ln_beta, ln_gamma};

const LN_SQRT_2PI: f64 = 0.918_938_533_204_672_8;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum DistError {
    #[error("invalid moments for {family}: mean={mean}, sd={sd} ({reason})")]
    InvalidMoments {
        family: Family,
        mean: f64,
        sd: f64,
        reason: &'static str,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Family {
    Normal,
    Gamma,
    Beta,
    Rayleigh,
}

impl Family {
    pub fn as_str(self) -> &'static str {
        match self {
            Family::Normal => "normal",
            Family::Gamma => "gamma",
            Family::Beta => "beta",
            Family::Rayleigh => "rayleigh",
        }
    }

    /// Open support of the family.
    pub fn in_support(self, x: f64) -> bool {
        match self {
            Family::Normal => x.is_finite(),
            Family::Gamma | Family::Rayleigh => x > 0.0 && x.is_finite(),
            Family::Beta => x > 0.0 && x < 1.0,
        }
    }
}

impl fmt::Display for Family {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Family {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim().to_ascii_lowercase().as_str() {
            "normal" => Ok(Family::Normal),
            "gamma" => Ok(Family::Gamma),
            "beta" => Ok(Family::Beta),
            "rayleigh" => Ok(Family::Rayleigh),
            other => Err(format!("unknown distribution family '{other}'")),
        }
    }
}

/// A density family tagged with its first two moments.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DistSpec {
    pub family: Family,
    pub mean: f64,
    pub sd: f64,
}

/// Family-specific parameters recovered from the moments.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum NativeParams {
    Normal { mean: f64, sd: f64 },
    Gamma { shape: f64, rate: f64 },
    Beta { alpha: f64, beta: f64 },
    Rayleigh { scale: f64 },
}

impl NativeParams {
    /// Analytic (mean, sd) of the native parameterization.
    pub fn moments(&self) -> (f64, f64) {
        match *self {
            NativeParams::Normal { mean, sd } => (mean, sd),
            NativeParams::Gamma { shape, rate } => (shape / rate, shape.sqrt() / rate),
            NativeParams::Beta { alpha, beta } => {
                let s = alpha + beta;
                (alpha / s, (alpha * beta / (s * s * (s + 1.0))).sqrt())
            }
            NativeParams::Rayleigh { scale } => (
                scale * (PI / 2.0).sqrt(),
                scale * ((4.0 - PI) / 2.0).sqrt(),
            ),
        }
    }
}

impl DistSpec {
    pub fn new(family: Family, mean: f64, sd: f64) -> Result<Self, DistError> {
        let spec = Self { family, mean, sd };
        spec.native_params()?;
        Ok(spec)
    }

    pub fn normal(mean: f64, sd: f64) -> Self {
        Self { family: Family::Normal, mean, sd }
    }

    pub fn gamma(mean: f64, sd: f64) -> Self {
        Self { family: Family::Gamma, mean, sd }
    }

    pub fn beta(mean: f64, sd: f64) -> Self {
        Self { family: Family::Beta, mean, sd }
    }

    pub fn rayleigh(mean: f64) -> Self {
        // sd carried for completeness: the Rayleigh sd implied by the mean
        let scale = mean / (PI / 2.0).sqrt();
        Self { family: Family::Rayleigh, mean, sd: scale * ((4.0 - PI) / 2.0).sqrt() }
    }

    fn invalid(&self, reason: &'static str) -> DistError {
        DistError::InvalidMoments {
            family: self.family,
            mean: self.mean,
            sd: self.sd,
            reason,
        }
    }

    pub fn native_params(&self) -> Result<NativeParams, DistError> {
        let (m, s) = (self.mean, self.sd);
        if !m.is_finite() || !s.is_finite() {
            return Err(self.invalid("moments must be finite"));
        }
        if s <= 0.0 {
            return Err(self.invalid("sd must be positive"));
        }
        match self.family {
            Family::Normal => Ok(NativeParams::Normal { mean: m, sd: s }),
            Family::Gamma => {
                if m <= 0.0 {
                    return Err(self.invalid("gamma mean must be positive"));
                }
                let var = s * s;
                Ok(NativeParams::Gamma { shape: m * m / var, rate: m / var })
            }
            Family::Beta => {
                if m <= 0.0 || m >= 1.0 {
                    return Err(self.invalid("beta mean must lie in (0, 1)"));
                }
                let var = s * s;
                if var >= m * (1.0 - m) {
                    return Err(self.invalid("beta variance must be below mean(1-mean)"));
                }
                let nu = m * (1.0 - m) / var - 1.0;
                Ok(NativeParams::Beta { alpha: m * nu, beta: (1.0 - m) * nu })
            }
            Family::Rayleigh => {
                if m <= 0.0 {
                    return Err(self.invalid("rayleigh mean must be positive"));
                }
                Ok(NativeParams::Rayleigh { scale: m / (PI / 2.0).sqrt() })
            }
        }
    }

    /// The sd the density actually has (differs from `sd` only for Rayleigh).
    pub fn effective_sd(&self) -> Result<f64, DistError> {
        Ok(self.native_params()?.moments().1)
    }

    /// Natural-log density at `x`; `-inf` outside the support.
    pub fn log_pdf(&self, x: f64) -> Result<f64, DistError> {
        let params = self.native_params()?;
        Ok(log_pdf_native(&params, x))
    }

    pub fn draw<R: Rng + ?Sized>(&self, rng: &mut R) -> Result<f64, DistError> {
        let params = self.native_params()?;
        Ok(draw_native(&params, rng))
    }
}

/// Log-density for already-converted parameters.
pub fn log_pdf_native(params: &NativeParams, x: f64) -> f64 {
    if x.is_nan() {
        return f64::NEG_INFINITY;
    }
    match *params {
        NativeParams::Normal { mean, sd } => {
            let z = (x - mean) / sd;
            -0.5 * z * z - sd.ln() - LN_SQRT_2PI
        }
        NativeParams::Gamma { shape, rate } => {
            if x <= 0.0 || !x.is_finite() {
                return f64::NEG_INFINITY;
            }
            shape * rate.ln() - ln_gamma(shape) + (shape - 1.0) * x.ln() - rate * x
        }
        NativeParams::Beta { alpha, beta } => {
            if x <= 0.0 || x >= 1.0 {
                return f64::NEG_INFINITY;
            }
            (alpha - 1.0) * x.ln() + (beta - 1.0) * (1.0 - x).ln() - ln_beta(alpha, beta)
        }
        NativeParams::Rayleigh { scale } => {
            if x <= 0.0 || !x.is_finite() {
                return f64::NEG_INFINITY;
            }
            let s2 = scale * scale;
            x.ln() - s2.ln() - x * x / (2.0 * s2)
        }
    }
}

pub fn draw_native<R: Rng + ?Sized>(params: &NativeParams, rng: &mut R) -> f64 {
    match *params {
        NativeParams::Normal { mean, sd } => {
            rand_distr::Normal::new(mean, sd).expect("validated normal").sample(rng)
        }
        NativeParams::Gamma { shape, rate } => rand_distr::Gamma::new(shape, 1.0 / rate)
            .expect("validated gamma")
            .sample(rng),
        NativeParams::Beta { alpha, beta } => {
            // clamp away from the endpoints so the draw stays in the open support
            let x: f64 = rand_distr::Beta::new(alpha, beta).expect("validated beta").sample(rng);
            x.clamp(f64::EPSILON, 1.0 - f64::EPSILON)
        }
        NativeParams::Rayleigh { scale } => {
            // inverse CDF on (0, 1]
            let u: f64 = 1.0 - rng.gen::<f64>();
            scale * (-2.0 * u.ln()).sqrt()
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn native_params_examples() {
        assert_eq!(
            DistSpec::gamma(2.0, 1.0).native_params().unwrap(),
            NativeParams::Gamma { shape: 4.0, rate: 2.0 }
        );
        match DistSpec::beta(0.5, 0.1).native_params().unwrap() {
            NativeParams::Beta { alpha, beta } => {
                assert!((alpha - 12.0).abs() < 1e-12);
                assert!((beta - 12.0).abs() < 1e-12);
            }
            other => panic!("unexpected {other:?}"),
        }
        match DistSpec::rayleigh(1.0).native_params().unwrap() {
            NativeParams::Rayleigh { scale } => assert!((scale - 0.797_884_560_802_865_4).abs() < 1e-12),
            other => panic!("unexpected {other:?}"),
        }
        assert!(matches!(
            DistSpec::beta(0.5, 0.6).native_params(),
            Err(DistError::InvalidMoments { .. })
        ));
    }

    #[test]
    fn invalid_moments() {
        assert!(DistSpec::new(Family::Normal, 0.0, 0.0).is_err());
        assert!(DistSpec::new(Family::Gamma, -1.0, 1.0).is_err());
        assert!(DistSpec::new(Family::Beta, 1.0, 0.1).is_err());
        assert!(DistSpec::new(Family::Rayleigh, 0.0, 1.0).is_err());
        assert!(DistSpec::new(Family::Normal, f64::NAN, 1.0).is_err());
    }

    #[test]
    fn log_pdf_examples() {
        let n = DistSpec::normal(0.0, 1.0).log_pdf(0.0).unwrap();
        assert!((n + 0.918_938_5).abs() < 1e-7);
        assert_eq!(DistSpec::gamma(2.0, 1.0).log_pdf(-1.0).unwrap(), f64::NEG_INFINITY);
        // scipy.stats.gamma.logpdf(2, a=4, scale=0.5)
        let g = DistSpec::gamma(2.0, 1.0).log_pdf(2.0).unwrap();
        assert!((g - (-0.939_729_205_308_438_2)).abs() < 1e-12);
        // scipy.stats.gamma.logpdf(0.5, a=4, scale=0.5)
        let g = DistSpec::gamma(2.0, 1.0).log_pdf(0.5).unwrap();
        assert!((g - (-2.098_612_288_668_109_6)).abs() < 1e-12);
        // scipy.stats.beta.logpdf(0.3, 12, 12)
        let b = DistSpec::beta(0.5, 0.1).log_pdf(0.3).unwrap();
        assert!((b - (-0.565_065_354_894_752_4)).abs() < 1e-11);
        // scipy.stats.rayleigh.logpdf(1.2, scale=1/sqrt(pi/2))
        let r = DistSpec::rayleigh(1.0).log_pdf(1.2).unwrap();
        assert!((r - (-0.497_069_093_208_916)).abs() < 1e-12);
    }

    #[test]
    fn out_of_support_is_neg_inf() {
        assert_eq!(DistSpec::beta(0.5, 0.1).log_pdf(1.2).unwrap(), f64::NEG_INFINITY);
        assert_eq!(DistSpec::beta(0.5, 0.1).log_pdf(0.0).unwrap(), f64::NEG_INFINITY);
        assert_eq!(DistSpec::rayleigh(1.0).log_pdf(0.0).unwrap(), f64::NEG_INFINITY);
        assert_eq!(DistSpec::normal(0.0, 1.0).log_pdf(f64::NAN).unwrap(), f64::NEG_INFINITY);
    }

    #[test]
    fn draws_are_deterministic_and_in_support() {
        let spec = DistSpec::normal(0.0, 1.0);
        let a = spec.draw(&mut ChaCha8Rng::seed_from_u64(11)).unwrap();
        let b = spec.draw(&mut ChaCha8Rng::seed_from_u64(11)).unwrap();
        assert_eq!(a.to_bits(), b.to_bits());
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for _ in 0..1000 {
            assert!(DistSpec::gamma(2.0, 1.0).draw(&mut rng).unwrap() > 0.0);
            let x = DistSpec::beta(0.02, 0.1).draw(&mut rng).unwrap();
            assert!(x > 0.0 && x < 1.0);
        }
    }

    #[test]
    fn family_round_trips_through_text() {
        for f in [Family::Normal, Family::Gamma, Family::Beta, Family::Rayleigh] {
            assert_eq!(f.to_string().parse::<Family>().unwrap(), f);
        }
        assert!("cauchy".parse::<Family>().is_err());
    }
}
