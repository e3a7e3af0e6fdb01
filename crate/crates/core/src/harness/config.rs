//! Configs for the single-shot CLI commands.

use serde::{Deserialize, Serialize};

use crate::calibration::{split_quantiles, BootstrapMethod, Side};
use crate::error::{Error, Result};
use crate::kernels::KernelSpec;

fn half() -> f64 {
    0.5
}

fn naive() -> BootstrapMethod {
    BootstrapMethod::Naive
}

fn one() -> usize {
    1
}

fn join(problems: Vec<String>) -> Result<()> {
    if problems.is_empty() {
        Ok(())
    } else {
        Err(Error::parameter(problems.join("; ")))
    }
}

/// Bootstrap calibration of one data set.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CalibrateConfig {
    pub input_kernel: KernelSpec,
    pub output_kernel: KernelSpec,
    pub lambda: f64,
    pub alpha: f64,
    #[serde(default = "half")]
    pub split: f64,
    pub replicates: usize,
    #[serde(default)]
    pub side: Side,
    #[serde(default = "naive")]
    pub method: BootstrapMethod,
}

impl CalibrateConfig {
    pub fn problems(&self) -> Vec<String> {
        let mut out = Vec::new();
        if let Err(e) = self.input_kernel.validate() {
            out.push(format!("input_kernel: {e}"));
        }
        if let Err(e) = self.output_kernel.validate() {
            out.push(format!("output_kernel: {e}"));
        }
        if !(self.lambda > 0.0 && self.lambda.is_finite()) {
            out.push(format!("lambda must be positive, got {}", self.lambda));
        }
        if let Err(e) = split_quantiles(self.alpha, self.split) {
            out.push(e.to_string());
        }
        if self.replicates == 0 {
            out.push("replicates must be at least 1".into());
        }
        out
    }

    pub fn validate(&self) -> Result<()> {
        join(self.problems())
    }
}

/// Trajectories of a random orthonormal linear system.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SimulateConfig {
    pub dim: usize,
    pub noise_std: f64,
    pub steps: usize,
    #[serde(default = "one")]
    pub trajectories: usize,
}

impl SimulateConfig {
    pub fn problems(&self) -> Vec<String> {
        let mut out = Vec::new();
        if self.dim == 0 {
            out.push("dim must be at least 1".into());
        }
        if !(self.noise_std >= 0.0 && self.noise_std.is_finite()) {
            out.push(format!("noise_std must be nonnegative, got {}", self.noise_std));
        }
        if self.steps == 0 {
            out.push("steps must be at least 1".into());
        }
        if self.trajectories == 0 {
            out.push("trajectories must be at least 1".into());
        }
        out
    }

    pub fn validate(&self) -> Result<()> {
        join(self.problems())
    }
}
