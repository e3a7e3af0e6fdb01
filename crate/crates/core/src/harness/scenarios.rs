//! Synthetic conditional two-sample problems.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::harness::functions::{sample_rkhs_function_with, BoxDomain, RkhsFunction};
use crate::harness::noise::NoiseModel;
use crate::kernels::KernelSpec;
use crate::points::Points;
use crate::regression::DataSet;
use crate::rng::substream;
use crate::testing::Regime as Hypothesis;

/// `k(x, 0)` at or above this value marks the region where rare violations live.
pub const RARE_REGION_LEVEL: f64 = 1e-2;
const REJECTION_ATTEMPTS: usize = 100_000;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum Regime {
    /// `f₁ = f₂`, identical noise law.
    Null,
    /// `f₂ = f₁ + h` with `‖h‖ = xi`.
    Shift { xi: f64 },
    /// `f₂ = f₁ + k(·, 0)`; covariates fall in `{k(x,0) ≥ 10⁻²}` with probability `theta`.
    Rare { theta: f64 },
    /// Equal means; the second set's noise is a `±mu` mixture.
    NoiseMixture { mu: f64 },
    /// `f₁` and `f₂` drawn independently.
    Independent,
}

impl Regime {
    pub fn validate(&self) -> Result<()> {
        let ok = match *self {
            Regime::Shift { xi } => xi >= 0.0 && xi.is_finite(),
            Regime::Rare { theta } => (0.0..=1.0).contains(&theta),
            Regime::NoiseMixture { mu } => mu >= 0.0 && mu.is_finite(),
            Regime::Null | Regime::Independent => true,
        };
        if ok {
            Ok(())
        } else {
            Err(Error::parameter(format!("invalid regime parameters {self:?}")))
        }
    }

    /// Whether the conditional distributions coincide everywhere.
    pub fn hypothesis(&self) -> Hypothesis {
        match *self {
            Regime::Null | Regime::Shift { xi: 0.0 } | Regime::NoiseMixture { mu: 0.0 } => Hypothesis::Null,
            _ => Hypothesis::Alternative,
        }
    }

    /// Copy with the named parameter replaced.
    pub fn with_parameter(&self, name: &str, value: f64) -> Result<Regime> {
        let r = match (self, name) {
            (Regime::Shift { .. }, "xi") => Regime::Shift { xi: value },
            (Regime::Rare { .. }, "theta") => Regime::Rare { theta: value },
            (Regime::NoiseMixture { .. }, "mu") => Regime::NoiseMixture { mu: value },
            _ => return Err(Error::parameter(format!("regime {self:?} has no parameter '{name}'"))),
        };
        Ok(r)
    }
}

fn one() -> f64 {
    1.0
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioConfig {
    pub domain: BoxDomain,
    pub input_kernel: KernelSpec,
    /// Number of anchors of each sampled mean function.
    pub mean_dimension: usize,
    /// RKHS norm of each sampled mean function.
    #[serde(default = "one")]
    pub norm: f64,
    pub noise_std: f64,
    pub regime: Regime,
}

impl ScenarioConfig {
    pub fn problems(&self) -> Vec<String> {
        let mut out = Vec::new();
        if let Err(e) = self.domain.validate() {
            out.push(format!("scenario.domain: {e}"));
        }
        if let Err(e) = self.input_kernel.validate() {
            out.push(format!("scenario.input_kernel: {e}"));
        }
        if self.mean_dimension == 0 {
            out.push("scenario.mean_dimension must be at least 1".into());
        }
        if !(self.norm > 0.0 && self.norm.is_finite()) {
            out.push(format!("scenario.norm must be positive, got {}", self.norm));
        }
        if !(self.noise_std >= 0.0 && self.noise_std.is_finite()) {
            out.push(format!("scenario.noise_std must be nonnegative, got {}", self.noise_std));
        }
        if let Err(e) = self.regime.validate() {
            out.push(format!("scenario.regime: {e}"));
        }
        out
    }

    pub fn validate(&self) -> Result<()> {
        let p = self.problems();
        if p.is_empty() {
            Ok(())
        } else {
            Err(Error::parameter(p.join("; ")))
        }
    }
}

/// One draw of mean functions and noise laws for a configuration.
#[derive(Clone, Debug)]
pub struct Scenario {
    pub config: ScenarioConfig,
    pub f1: RkhsFunction,
    pub f2: RkhsFunction,
    pub noise1: NoiseModel,
    pub noise2: NoiseModel,
}

impl Scenario {
    pub fn draw(config: &ScenarioConfig, seed: u64) -> Result<Self> {
        config.validate()?;
        let c = config;
        let mut rng = substream(seed, &[]);
        let f1 = sample_rkhs_function_with(&c.input_kernel, &c.domain, c.mean_dimension, c.norm, &mut rng)?;
        let gaussian = NoiseModel::Gaussian { std: c.noise_std };
        let (f2, noise2) = match c.regime {
            Regime::Null | Regime::Shift { xi: 0.0 } => (f1.clone(), gaussian),
            Regime::Shift { xi } => {
                let h = sample_rkhs_function_with(&c.input_kernel, &c.domain, c.mean_dimension, xi, &mut rng)?;
                (f1.plus(&h)?, gaussian)
            }
            Regime::Rare { .. } => {
                let bump = RkhsFunction::feature(c.input_kernel, &vec![0.0; c.domain.dim])?;
                (f1.plus(&bump)?, gaussian)
            }
            Regime::NoiseMixture { mu } => (f1.clone(), NoiseModel::SymmetricMixture { mean: mu, std: c.noise_std }),
            Regime::Independent => {
                let f2 = sample_rkhs_function_with(&c.input_kernel, &c.domain, c.mean_dimension, c.norm, &mut rng)?;
                (f2, gaussian)
            }
        };
        Ok(Self { config: config.clone(), f1, f2, noise1: gaussian, noise2 })
    }

    fn origin_similarity(&self, x: &[f64]) -> f64 {
        self.config.input_kernel.eval(x, &vec![0.0; x.len()])
    }

    /// Ground truth: whether the conditional distributions agree at `x`.
    pub fn null_holds(&self, x: &[f64]) -> bool {
        match self.config.regime {
            Regime::Rare { .. } => self.origin_similarity(x) < RARE_REGION_LEVEL,
            r => r.hypothesis() == Hypothesis::Null,
        }
    }

    fn sample_covariate<R: Rng + ?Sized>(&self, rng: &mut R) -> Result<Vec<f64>> {
        let domain = &self.config.domain;
        let Regime::Rare { theta } = self.config.regime else {
            return Ok(domain.sample(rng));
        };
        let want_diff = rng.random::<f64>() < theta;
        for _ in 0..REJECTION_ATTEMPTS {
            let x = domain.sample(rng);
            if (self.origin_similarity(&x) >= RARE_REGION_LEVEL) == want_diff {
                return Ok(x);
            }
        }
        Err(Error::parameter("rare-violation region has negligible mass in the domain"))
    }

    fn sample_set<R: Rng + ?Sized>(&self, f: &RkhsFunction, noise: &NoiseModel, n: usize, rng: &mut R) -> Result<DataSet> {
        let mut xs = Vec::with_capacity(n * self.config.domain.dim);
        let mut zs = Vec::with_capacity(n);
        for _ in 0..n {
            let x = self.sample_covariate(rng)?;
            zs.push(f.eval(&x) + noise.sample(rng));
            xs.extend(x);
        }
        DataSet::new(Points::new(self.config.domain.dim, xs)?, Points::from_scalars(&zs))
    }

    /// Two independent data sets of `n` pairs each.
    pub fn sample_pair(&self, n: usize, seed: u64) -> Result<(DataSet, DataSet)> {
        if n == 0 {
            return Err(Error::parameter("data sets need at least one pair"));
        }
        let d1 = self.sample_set(&self.f1, &self.noise1, n, &mut substream(seed, &[1]))?;
        let d2 = self.sample_set(&self.f2, &self.noise2, n, &mut substream(seed, &[2]))?;
        Ok((d1, d2))
    }
}

/// Draws fresh mean functions and a data pair from one seed.
pub fn generate_pair(config: &ScenarioConfig, n: usize, seed: u64) -> Result<(DataSet, DataSet)> {
    Scenario::draw(config, substream_seed(seed, 0))?.sample_pair(n, substream_seed(seed, 1))
}

fn substream_seed(seed: u64, i: u64) -> u64 {
    crate::rng::derive_seed(seed, &[i])
}
