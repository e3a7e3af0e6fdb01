//! Sliding-window change detection against a reference data set.

use nalgebra::DMatrix;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::calibration::{bootstrap, BootstrapConfig, BootstrapMethod, Side};
use crate::error::{Error, Result};
use crate::harness::dynamics::{extend_trajectory, perturb_dynamics, simulate_trajectories, LinearSystem, Perturbation};
use crate::kernels::{cross_entries, KernelSpec};
use crate::points::Points;
use crate::regression::{fit, DataSet};
use crate::rng::{derive_seed, substream};

/// Which window summary raises an alarm.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum AlarmRule {
    /// Mean over the window of statistic / threshold.
    #[default]
    MeanRatio,
    /// Maximum over the window of statistic / threshold.
    MaxRatio,
}

fn linear0() -> KernelSpec {
    KernelSpec::linear(0.0).expect("valid kernel")
}

fn wild() -> BootstrapMethod {
    BootstrapMethod::Wild
}

fn half() -> f64 {
    0.5
}

fn default_reference_grid() -> usize {
    200
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MonitorConfig {
    pub dim: usize,
    pub noise_std: f64,
    pub reference_trajectories: usize,
    pub reference_length: usize,
    pub window: usize,
    /// Transitions before the dynamics switch to the perturbed matrix.
    pub change_step: usize,
    /// Length of the monitored trajectory.
    pub steps: usize,
    pub xi: f64,
    pub lambda: f64,
    pub alpha: f64,
    pub replicates: usize,
    #[serde(default = "half")]
    pub split: f64,
    #[serde(default = "linear0")]
    pub input_kernel: KernelSpec,
    #[serde(default = "linear0")]
    pub output_kernel: KernelSpec,
    /// Reference covariates used as the reference calibration grid.
    #[serde(default = "default_reference_grid")]
    pub reference_grid: usize,
    #[serde(default)]
    pub alarm: AlarmRule,
    #[serde(default = "wild")]
    pub reference_calibration: BootstrapMethod,
    #[serde(default = "wild")]
    pub window_calibration: BootstrapMethod,
    /// Skip calibration and use `[β_ref, β_window]`.
    #[serde(default)]
    pub fixed_betas: Option<[f64; 2]>,
}

impl Default for MonitorConfig {
    fn default() -> Self {
        Self {
            dim: 2,
            noise_std: 0.01,
            reference_trajectories: 5,
            reference_length: 400,
            window: 50,
            change_step: 200,
            steps: 300,
            xi: 2.0,
            lambda: 0.01,
            alpha: 0.05,
            replicates: 100,
            split: 0.5,
            input_kernel: linear0(),
            output_kernel: linear0(),
            reference_grid: 200,
            alarm: AlarmRule::MeanRatio,
            reference_calibration: BootstrapMethod::Wild,
            window_calibration: BootstrapMethod::Wild,
            fixed_betas: None,
        }
    }
}

impl MonitorConfig {
    pub fn problems(&self) -> Vec<String> {
        let mut out = Vec::new();
        if self.dim == 0 {
            out.push("dim must be at least 1".into());
        }
        if !(self.noise_std >= 0.0 && self.noise_std.is_finite()) {
            out.push(format!("noise_std must be nonnegative, got {}", self.noise_std));
        }
        if self.reference_trajectories == 0 || self.reference_length == 0 {
            out.push("reference data needs at least one trajectory of one step".into());
        }
        if self.window == 0 {
            out.push("window must be at least 1".into());
        }
        if self.steps == 0 {
            out.push("steps must be at least 1".into());
        }
        if self.change_step > self.steps {
            out.push(format!("change_step {} exceeds steps {}", self.change_step, self.steps));
        }
        if !(self.xi >= 0.0 && self.xi.is_finite()) {
            out.push(format!("xi must be nonnegative, got {}", self.xi));
        }
        if !(self.lambda > 0.0 && self.lambda.is_finite()) {
            out.push(format!("lambda must be positive, got {}", self.lambda));
        }
        if let Err(e) = crate::calibration::split_quantiles(self.alpha, self.split) {
            out.push(e.to_string());
        }
        if self.replicates == 0 {
            out.push("replicates must be at least 1".into());
        }
        if self.reference_grid == 0 {
            out.push("reference_grid must be at least 1".into());
        }
        if let Err(e) = self.input_kernel.validate() {
            out.push(format!("input_kernel: {e}"));
        }
        if let Err(e) = self.output_kernel.validate() {
            out.push(format!("output_kernel: {e}"));
        }
        if let Some(b) = self.fixed_betas {
            if !b.iter().all(|v| *v >= 0.0 && v.is_finite()) {
                out.push("fixed_betas must be nonnegative".into());
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
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct MonitorRow {
    /// Transitions observed so far.
    pub step: usize,
    pub warm_up: bool,
    /// Whether the window contains post-change transitions.
    pub post_change: bool,
    pub window_len: usize,
    pub max_ratio: f64,
    pub mean_ratio: f64,
    /// Mean reference posterior scale over the window covariates.
    pub sigma_ref_mean: f64,
    /// `sigma_ref_mean` relative to the reference scale at the initial state.
    pub sigma_ratio: f64,
    pub beta_window: f64,
    pub alarm: bool,
}

#[derive(Clone, Debug, Serialize)]
pub struct MonitorRun {
    pub beta_reference: f64,
    pub perturbation: Perturbation,
    pub rows: Vec<MonitorRow>,
}

impl MonitorRun {
    /// Alarms raised by full windows before the change.
    pub fn false_alarms(&self) -> usize {
        self.rows.iter().filter(|r| r.alarm && !r.warm_up && !r.post_change).count()
    }

    /// Alarms raised by warm-up windows before the change.
    pub fn warm_up_alarms(&self) -> usize {
        self.rows.iter().filter(|r| r.alarm && r.warm_up && !r.post_change).count()
    }

    /// Post-change transitions seen when the first post-change alarm fired.
    pub fn detection_delay(&self, change_step: usize) -> Option<usize> {
        self.rows.iter().find(|r| r.post_change && r.alarm).map(|r| r.step - change_step)
    }

    /// Mean of `sigma_ratio` over full windows before or after the change.
    pub fn mean_sigma_ratio(&self, post_change: bool) -> f64 {
        let rows: Vec<_> = self.rows.iter().filter(|r| !r.warm_up && r.post_change == post_change).collect();
        rows.iter().map(|r| r.sigma_ratio).sum::<f64>() / rows.len().max(1) as f64
    }
}

fn ratio(stat: f64, threshold: f64) -> f64 {
    if threshold > 0.0 {
        stat / threshold
    } else if stat > 0.0 {
        f64::INFINITY
    } else {
        0.0
    }
}

fn evenly_spaced(n: usize, k: usize) -> Vec<usize> {
    let k = k.min(n);
    (0..k).map(|i| i * n / k).collect()
}

/// Simulates reference and monitored trajectories, then slides a window over
/// the monitored one and tests it against the reference at every step.
pub fn monitor(cfg: &MonitorConfig, seed: u64) -> Result<MonitorRun> {
    cfg.validate()?;
    let d = cfg.dim;
    let sys = LinearSystem::random(d, cfg.noise_std, derive_seed(seed, &[0]))?;
    let reference = simulate_trajectories(&sys, cfg.reference_trajectories, cfg.reference_length, derive_seed(seed, &[1]))?;
    let perturbation = perturb_dynamics(&sys.a, cfg.xi, derive_seed(seed, &[2]))?;
    let changed = LinearSystem { a: perturbation.a_prime.clone(), ..sys.clone() };

    let mut traj = DataSet::new(Points::empty(d), Points::empty(d))?;
    let mut rng = substream(seed, &[3]);
    let x = extend_trajectory(&sys, sys.initial_state.clone(), cfg.change_step, &mut traj, &mut rng)?;
    extend_trajectory(&changed, x, cfg.steps - cfg.change_step, &mut traj, &mut rng)?;

    let (k, kappa) = (&cfg.input_kernel, &cfg.output_kernel);
    let reference_model = fit(&reference, k, cfg.lambda, kappa)?;
    let sigma_origin = reference_model.posterior_scale(sys.initial_state.as_slice())?;
    let beta_reference = match cfg.fixed_betas {
        Some([b, _]) => b,
        None => {
            let grid = reference.covariates().select(&evenly_spaced(reference.len(), cfg.reference_grid));
            let bc = BootstrapConfig {
                replicates: cfg.replicates,
                alpha: cfg.alpha,
                split: cfg.split,
                side: Side::First,
                grid: Some(grid),
                seed: derive_seed(seed, &[4]),
            };
            bootstrap(cfg.reference_calibration, &reference, k, kappa, cfg.lambda, &bc)?.beta
        }
    };

    // Reference-side quantities for every monitored covariate.
    let rq = reference_model.query(traj.covariates())?;
    let c_rt = cross_entries(kappa, reference.measurements(), traj.measurements());
    let c_rr = cross_entries(kappa, reference.measurements(), reference.measurements());
    let self_term: Vec<f64> = (0..traj.len())
        .map(|t| {
            let a = rq.coefficients.row(t).transpose();
            (a.transpose() * &c_rr * &a)[(0, 0)]
        })
        .collect();
    drop(c_rr);
    // Row t, column s: μ_ref(x_t) evaluated at measurement z_s.
    let cross: DMatrix<f64> = &rq.coefficients * c_rt;

    let rows = (1..=cfg.steps)
        .into_par_iter()
        .filter(|&t| t >= 2.min(cfg.window))
        .map(|t| {
            let start = t.saturating_sub(cfg.window);
            let window = traj.window(start, t);
            let u = window.len();
            let model = fit(&window, k, cfg.lambda, kappa)?;
            let wq = model.query(window.covariates())?;
            let c_ww = cross_entries(kappa, window.measurements(), window.measurements());
            let beta_window = match cfg.fixed_betas {
                Some([_, b]) => b,
                None => {
                    let bc = BootstrapConfig {
                        replicates: cfg.replicates,
                        alpha: cfg.alpha,
                        split: cfg.split,
                        side: Side::Second,
                        grid: None,
                        seed: derive_seed(seed, &[5, t as u64]),
                    };
                    bootstrap(cfg.window_calibration, &window, k, kappa, cfg.lambda, &bc)?.beta
                }
            };
            let mut ratios = Vec::with_capacity(u);
            let mut sigma_ref = 0.0;
            for g in 0..u {
                let i = start + g;
                let a = wq.coefficients.row(g);
                let t_ww = (a * &c_ww * a.transpose())[(0, 0)];
                let t_rw: f64 = (0..u).map(|j| cross[(i, start + j)] * a[j]).sum();
                let stat = (self_term[i] + t_ww - 2.0 * t_rw).max(0.0).sqrt();
                let threshold = beta_reference * rq.sigma[i] + beta_window * wq.sigma[g];
                ratios.push(ratio(stat, threshold));
                sigma_ref += rq.sigma[i];
            }
            let max_ratio = ratios.iter().copied().fold(0.0, f64::max);
            let mean_ratio = ratios.iter().sum::<f64>() / u as f64;
            let alarm = match cfg.alarm {
                AlarmRule::MeanRatio => mean_ratio > 1.0,
                AlarmRule::MaxRatio => max_ratio > 1.0,
            };
            Ok(MonitorRow {
                step: t,
                warm_up: u < cfg.window,
                post_change: t > cfg.change_step,
                window_len: u,
                max_ratio,
                mean_ratio,
                sigma_ref_mean: sigma_ref / u as f64,
                sigma_ratio: ratio(sigma_ref / u as f64, sigma_origin),
                beta_window,
                alarm,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(MonitorRun { beta_reference, perturbation, rows })
}
