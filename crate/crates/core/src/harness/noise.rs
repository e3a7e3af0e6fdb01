use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Mean-zero additive measurement noise.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "snake_case", deny_unknown_fields)]
pub enum NoiseModel {
    Gaussian { std: f64 },
    /// Equal-weight blend of `N(−mean, std²)` and `N(+mean, std²)`.
    SymmetricMixture { mean: f64, std: f64 },
}

impl NoiseModel {
    pub fn validate(&self) -> Result<()> {
        let ok = match *self {
            NoiseModel::Gaussian { std } => std >= 0.0 && std.is_finite(),
            NoiseModel::SymmetricMixture { mean, std } => std >= 0.0 && std.is_finite() && mean.is_finite(),
        };
        if ok {
            Ok(())
        } else {
            Err(Error::parameter(format!("invalid noise model {self:?}")))
        }
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        match *self {
            NoiseModel::Gaussian { std } => std * rng.sample::<f64, _>(StandardNormal),
            NoiseModel::SymmetricMixture { mean, std } => {
                let sign = if rng.random::<bool>() { 1.0 } else { -1.0 };
                sign * mean + std * rng.sample::<f64, _>(StandardNormal)
            }
        }
    }

    pub fn variance(&self) -> f64 {
        match *self {
            NoiseModel::Gaussian { std } => std * std,
            NoiseModel::SymmetricMixture { mean, std } => mean * mean + std * std,
        }
    }
}
