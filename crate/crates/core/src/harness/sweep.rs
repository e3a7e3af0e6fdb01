//! Error-rate sweeps over one scenario or pipeline parameter.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::calibration::empirical_quantile;
use crate::error::{Error, Result};
use crate::harness::scenarios::{Scenario, ScenarioConfig};
use crate::rng::derive_seed;
use crate::testing::{positive_rates, Pipeline, Regime as Hypothesis};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepAxis {
    /// One of `xi`, `theta`, `mu`, `n`, `noise_std`, `lambda`.
    pub parameter: String,
    pub values: Vec<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepConfig {
    pub scenario: ScenarioConfig,
    /// Pairs per data set.
    pub n: usize,
    pub pipeline: Pipeline,
    /// Data-set pairs per mean-function draw.
    pub trials: usize,
    /// Independent mean-function draws.
    pub draws: usize,
    /// Levels evaluated on shared replicates; defaults to the pipeline level.
    #[serde(default)]
    pub alphas: Vec<f64>,
    #[serde(default)]
    pub sweep: Option<SweepAxis>,
}

const PARAMETERS: [&str; 6] = ["xi", "theta", "mu", "n", "noise_std", "lambda"];

impl SweepConfig {
    pub fn problems(&self) -> Vec<String> {
        let mut out = self.scenario.problems();
        out.extend(self.pipeline.problems().into_iter().map(|p| format!("pipeline: {p}")));
        if self.n == 0 {
            out.push("n must be at least 1".into());
        }
        if self.trials == 0 {
            out.push("trials must be at least 1".into());
        }
        if self.draws == 0 {
            out.push("draws must be at least 1".into());
        }
        for a in &self.alphas {
            if !(*a > 0.0 && *a < 1.0) {
                out.push(format!("alphas: {a} is outside (0,1)"));
            }
        }
        if let Some(axis) = &self.sweep {
            if !PARAMETERS.contains(&axis.parameter.as_str()) {
                out.push(format!("sweep.parameter '{}' is not one of {PARAMETERS:?}", axis.parameter));
            } else if axis.values.is_empty() {
                out.push("sweep.values is empty".into());
            } else {
                for &v in &axis.values {
                    if let Err(e) = self.at(&axis.parameter, v).and_then(|c| {
                        let p = c.problems();
                        if p.is_empty() {
                            Ok(())
                        } else {
                            Err(Error::parameter(p.join("; ")))
                        }
                    }) {
                        out.push(format!("sweep value {v}: {e}"));
                    }
                }
            }
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

    /// Copy with one parameter set; the sweep axis is dropped.
    pub fn at(&self, parameter: &str, value: f64) -> Result<SweepConfig> {
        let mut c = self.clone();
        c.sweep = None;
        match parameter {
            "xi" | "theta" | "mu" => c.scenario.regime = c.scenario.regime.with_parameter(parameter, value)?,
            "noise_std" => c.scenario.noise_std = value,
            "lambda" => c.pipeline.lambda = value,
            "n" => {
                if value < 1.0 || value.fract() != 0.0 {
                    return Err(Error::parameter(format!("n must be a positive integer, got {value}")));
                }
                c.n = value as usize;
            }
            _ => return Err(Error::parameter(format!("unknown sweep parameter '{parameter}'"))),
        }
        Ok(c)
    }

    fn levels(&self) -> Vec<f64> {
        if self.alphas.is_empty() {
            vec![self.pipeline.alpha]
        } else {
            self.alphas.clone()
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SweepRow {
    pub parameter: String,
    pub value: f64,
    pub draw: usize,
    pub alpha: f64,
    pub positive_rate: f64,
    pub error: f64,
    pub trials: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SweepSummary {
    pub parameter: String,
    pub value: f64,
    pub alpha: f64,
    pub mean_positive_rate: f64,
    pub q025: f64,
    pub q975: f64,
    pub mean_error: f64,
    pub draws: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SweepResult {
    pub rows: Vec<SweepRow>,
    pub summary: Vec<SweepSummary>,
}

/// Positive rates for every sweep value, draw and level.
///
/// Draw `d` uses the same mean functions and trial seeds at every sweep
/// value, so curves differ only through the swept parameter.
pub fn run_sweep(cfg: &SweepConfig, seed: u64) -> Result<SweepResult> {
    cfg.validate()?;
    let (parameter, values) = match &cfg.sweep {
        Some(a) => (a.parameter.clone(), a.values.clone()),
        None => ("none".to_string(), vec![f64::NAN]),
    };
    let alphas = cfg.levels();
    let mut rows = Vec::new();
    let mut summary = Vec::new();
    for &value in &values {
        let cell = if cfg.sweep.is_some() { cfg.at(&parameter, value)? } else { cfg.clone() };
        let regime = cell.scenario.regime.hypothesis();
        let per_draw = (0..cfg.draws)
            .into_par_iter()
            .map(|d| {
                let scenario = Scenario::draw(&cell.scenario, derive_seed(seed, &[0, d as u64]))?;
                let n = cell.n;
                positive_rates(
                    |s| scenario.sample_pair(n, s),
                    &cell.pipeline,
                    &alphas,
                    cell.trials,
                    regime,
                    derive_seed(seed, &[1, d as u64]),
                )
            })
            .collect::<Result<Vec<_>>>()?;
        for (i, &alpha) in alphas.iter().enumerate() {
            let rates: Vec<f64> = per_draw.iter().map(|e| e[i].positive_rate).collect();
            for (d, e) in per_draw.iter().enumerate() {
                rows.push(SweepRow {
                    parameter: parameter.clone(),
                    value,
                    draw: d,
                    alpha,
                    positive_rate: e[i].positive_rate,
                    error: e[i].error(),
                    trials: cell.trials,
                });
            }
            let mean = rates.iter().sum::<f64>() / rates.len() as f64;
            summary.push(SweepSummary {
                parameter: parameter.clone(),
                value,
                alpha,
                mean_positive_rate: mean,
                q025: empirical_quantile(&rates, 0.025),
                q975: empirical_quantile(&rates, 0.975),
                mean_error: if regime == Hypothesis::Null { mean } else { 1.0 - mean },
                draws: cfg.draws,
            });
        }
    }
    Ok(SweepResult { rows, summary })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::harness::functions::BoxDomain;
    use crate::harness::scenarios::Regime;
    use crate::kernels::KernelSpec;
    use crate::testing::Calibration;

    fn config() -> SweepConfig {
        SweepConfig {
            scenario: ScenarioConfig {
                domain: BoxDomain::new(2, -1.0, 1.0).unwrap(),
                input_kernel: KernelSpec::gaussian(0.25).unwrap(),
                mean_dimension: 12,
                norm: 1.0,
                noise_std: 0.1,
                regime: Regime::Shift { xi: 0.0 },
            },
            n: 20,
            pipeline: Pipeline {
                input_kernel: KernelSpec::gaussian(0.25).unwrap(),
                output_kernel: KernelSpec::linear(1.0).unwrap(),
                lambda: 0.1,
                alpha: 0.05,
                split: 0.5,
                calibration: Calibration::Naive { replicates: 20 },
            },
            trials: 4,
            draws: 2,
            alphas: vec![0.05, 0.1],
            sweep: Some(SweepAxis { parameter: "xi".into(), values: vec![0.0, 3.0] }),
        }
    }

    #[test]
    fn shape_and_summary() {
        let r = run_sweep(&config(), 1).unwrap();
        assert_eq!(r.rows.len(), 2 * 2 * 2);
        assert_eq!(r.summary.len(), 4);
        for s in &r.summary {
            assert!(s.q025 <= s.mean_positive_rate && s.mean_positive_rate <= s.q975);
        }
        // Larger level, same replicates: never fewer rejections.
        assert!(r.summary[1].mean_positive_rate >= r.summary[0].mean_positive_rate);
        assert_eq!(r, run_sweep(&config(), 1).unwrap());
    }

    #[test]
    fn bad_axis_is_reported_with_other_problems() {
        let mut c = config();
        c.sweep = Some(SweepAxis { parameter: "theta".into(), values: vec![0.5] });
        c.trials = 0;
        let p = c.problems();
        assert_eq!(p.len(), 2, "{p:?}");
        c.sweep = Some(SweepAxis { parameter: "gamma".into(), values: vec![0.5] });
        assert!(c.problems().iter().any(|p| p.contains("gamma")));
    }

    #[test]
    fn sample_size_axis() {
        let c = config().at("n", 30.0).unwrap();
        assert_eq!(c.n, 30);
        assert!(config().at("n", 2.5).is_err());
    }
}
