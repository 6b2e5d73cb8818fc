//! Train/test partitioning.

use rand::seq::SliceRandom;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SplitMode {
    /// Seeded shuffle.
    #[default]
    Random,
    /// Ascending by fade; the lowest fades train.
    Sequential,
}

impl std::str::FromStr for SplitMode {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "random" => Ok(SplitMode::Random),
            "sequential" => Ok(SplitMode::Sequential),
            other => Err(format!("unknown split mode '{other}' (expected random or sequential)")),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum SplitError {
    #[error("split ratio must lie in (0, 1), got {0}")]
    InvalidRatio(f64),
    #[error("ratio {ratio} leaves an empty side with {n} units")]
    TooFewPoints { ratio: f64, n: usize },
}

/// Number of training units: `round(n·ratio)`.
pub fn train_count(n: usize, ratio: f64) -> usize {
    (n as f64 * ratio).round() as usize
}

/// Disjoint, exhaustive partition into (train, test). Both sides keep the
/// input order except in sequential mode, where they are in fade order.
pub fn split<T: Clone>(
    items: &[T],
    ratio: f64,
    mode: SplitMode,
    seed: u64,
    fade: impl Fn(&T) -> f64,
) -> Result<(Vec<T>, Vec<T>), SplitError> {
    if !(ratio > 0.0 && ratio < 1.0) {
        return Err(SplitError::InvalidRatio(ratio));
    }
    let n = items.len();
    let n_train = train_count(n, ratio);
    if n_train == 0 || n_train == n {
        return Err(SplitError::TooFewPoints { ratio, n });
    }
    let mut order: Vec<usize> = (0..n).collect();
    match mode {
        SplitMode::Random => {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            order.shuffle(&mut rng);
            order[..n_train].sort_unstable();
            order[n_train..].sort_unstable();
        }
        SplitMode::Sequential => order.sort_by(|a, b| fade(&items[*a]).total_cmp(&fade(&items[*b]))),
    }
    let pick = |idx: &[usize]| idx.iter().map(|i| items[*i].clone()).collect::<Vec<T>>();
    Ok((pick(&order[..n_train]), pick(&order[n_train..])))
}
