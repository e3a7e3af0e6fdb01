//! Bootstrap calibration of the multipliers β.
//!
//! Output-space geometry enters only through a low-rank factor `F` of the
//! output Gram matrix of the data (`L ≈ FFᵀ`, from pivoted Cholesky), so
//! each replicate's embeddings live in `ℝʳ` and the CMMD is a Euclidean
//! distance there.
//!
//! A with-replacement resample is fitted on its distinct pairs only: a pair
//! drawn `c` times is equivalent to one copy with its ridge penalty scaled by
//! `1/c`, which leaves predictions and posterior scales unchanged while
//! shrinking the system to the number of distinct pairs.

use std::collections::BTreeMap;

use nalgebra::DMatrix;
use rand::Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::kernels::{cross_entries, gram_entries, KernelSpec};
use crate::linalg::{forward_cols, pivoted_cholesky, Cholesky};
use crate::points::{check_compatible, Points};
use crate::regression::DataSet;
use crate::rng::{substream, StreamRng};

/// Threshold below which a posterior-scale sum counts as degenerate.
const DEGENERATE: f64 = 1e-12;

/// Which of the two tested data sets a multiplier belongs to.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum Side {
    #[default]
    First,
    Second,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum BootstrapMethod {
    Naive,
    Wild,
    /// Wild multipliers with residual-based studentization.
    WildStudentized,
}

#[derive(Clone, Debug, PartialEq)]
pub struct BootstrapConfig {
    pub replicates: usize,
    pub alpha: f64,
    pub split: f64,
    pub side: Side,
    /// Calibration grid; `None` uses the data set's own covariates.
    pub grid: Option<Points>,
    pub seed: u64,
}

impl BootstrapConfig {
    pub fn new(replicates: usize, alpha: f64, seed: u64) -> Self {
        Self { replicates, alpha, split: 0.5, side: Side::First, grid: None, seed }
    }

    pub fn validate(&self) -> Result<()> {
        if self.replicates == 0 {
            return Err(Error::parameter("need at least one bootstrap replicate"));
        }
        split_quantiles(self.alpha, self.split)?;
        if self.grid.as_ref().is_some_and(Points::is_empty) {
            return Err(Error::parameter("calibration grid is empty"));
        }
        Ok(())
    }

    pub fn quantile_level(&self) -> Result<f64> {
        let (l1, l2) = split_quantiles(self.alpha, self.split)?;
        Ok(match self.side {
            Side::First => l1,
            Side::Second => l2,
        })
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct CalibrationResult {
    pub beta: f64,
    pub replicate_stats: Vec<f64>,
    pub quantile_level: f64,
    pub method: BootstrapMethod,
    /// Number of KRR system factorizations performed.
    pub factorizations: usize,
}

impl CalibrationResult {
    /// β at another quantile level, reusing the same replicates.
    pub fn beta_at(&self, level: f64) -> f64 {
        empirical_quantile(&self.replicate_stats, level)
    }
}

/// Quantile levels `(1 − αt, 1 − α(1−t))` for the two data sets.
pub fn split_quantiles(alpha: f64, t: f64) -> Result<(f64, f64)> {
    if !(alpha > 0.0 && alpha < 1.0) {
        return Err(Error::parameter(format!("alpha must lie in (0,1), got {alpha}")));
    }
    if !(t > 0.0 && t < 1.0) {
        return Err(Error::parameter(format!("split must lie in (0,1), got {t}")));
    }
    Ok((1.0 - alpha * t, 1.0 - alpha * (1.0 - t)))
}

/// Upper empirical quantile: the `⌈p·M⌉`-th smallest value.
pub fn empirical_quantile(values: &[f64], level: f64) -> f64 {
    if values.is_empty() {
        return f64::NAN;
    }
    let mut sorted = values.to_vec();
    sorted.sort_by(f64::total_cmp);
    let m = sorted.len();
    let rank = ((level * m as f64) - 1e-9).ceil().clamp(1.0, m as f64) as usize;
    sorted[rank - 1]
}

/// Mean-zero multipliers with covariance `I − 11ᵀ/n`.
pub fn wild_multipliers<R: Rng + ?Sized>(n: usize, rng: &mut R) -> Vec<f64> {
    let g: Vec<f64> = (0..n).map(|_| rng.sample(StandardNormal)).collect();
    let mean = g.iter().sum::<f64>() / n.max(1) as f64;
    g.into_iter().map(|v| v - mean).collect()
}

fn ratio(num: f64, den: f64) -> f64 {
    if den < DEGENERATE {
        if num < DEGENERATE {
            0.0
        } else {
            f64::INFINITY
        }
    } else {
        num / den
    }
}

fn finish(stats: Vec<f64>, cfg: &BootstrapConfig, method: BootstrapMethod, factorizations: usize) -> Result<CalibrationResult> {
    if let Some(m) = stats.iter().position(|s| !s.is_finite()) {
        return Err(Error::Calibration(format!(
            "replicate {m}: nonzero statistic at a grid point with vanishing posterior scale"
        )));
    }
    let quantile_level = cfg.quantile_level()?;
    Ok(CalibrationResult {
        beta: empirical_quantile(&stats, quantile_level),
        replicate_stats: stats,
        quantile_level,
        method,
        factorizations,
    })
}

fn prepare<'a>(
    data: &'a DataSet,
    k: &KernelSpec,
    kappa: &KernelSpec,
    lambda: f64,
    cfg: &'a BootstrapConfig,
) -> Result<&'a Points> {
    cfg.validate()?;
    k.validate()?;
    kappa.validate()?;
    if !(lambda > 0.0 && lambda.is_finite()) {
        return Err(Error::parameter(format!("regularization must be positive, got {lambda}")));
    }
    if data.len() < 2 {
        return Err(Error::input(format!("bootstrap needs at least 2 pairs, got {}", data.len())));
    }
    if !data.is_finite() {
        return Err(Error::input("data set contains non-finite values"));
    }
    let grid = cfg.grid.as_ref().unwrap_or(data.covariates());
    check_compatible(data.covariates(), grid)?;
    Ok(grid)
}

/// Shared, replicate-independent quantities for resampling.
pub(crate) struct ResampleContext {
    /// Input Gram of the data.
    gram: DMatrix<f64>,
    /// `G × n` cross-Gram between grid and data.
    grid_cross: DMatrix<f64>,
    grid_diag: Vec<f64>,
    /// `n × r` factor of the output Gram.
    factor: DMatrix<f64>,
    lambda: f64,
}

/// Posterior scales and embeddings of one resampled fit on the grid.
struct ResampledFit {
    sigma: Vec<f64>,
    /// `G × r`.
    embedding: DMatrix<f64>,
}

impl ResampleContext {
    pub(crate) fn new(data: &DataSet, grid: &Points, k: &KernelSpec, kappa: &KernelSpec, lambda: f64) -> Self {
        Self {
            gram: gram_entries(k, data.covariates()),
            grid_cross: cross_entries(k, grid, data.covariates()),
            grid_diag: grid.iter().map(|x| k.diag(x)).collect(),
            factor: pivoted_cholesky(&gram_entries(kappa, data.measurements())),
            lambda,
        }
    }

    fn n(&self) -> usize {
        self.gram.nrows()
    }

    fn draw(&self, rng: &mut StreamRng) -> BTreeMap<usize, usize> {
        let n = self.n();
        let mut counts = BTreeMap::new();
        for _ in 0..n {
            *counts.entry(rng.random_range(0..n)).or_insert(0) += 1;
        }
        counts
    }

    fn fit(&self, counts: &BTreeMap<usize, usize>) -> Result<ResampledFit> {
        let idx: Vec<usize> = counts.keys().copied().collect();
        let u = idx.len();
        let g = self.grid_diag.len();
        let r = self.factor.ncols();
        let mut system = DMatrix::from_fn(u, u, |a, b| self.gram[(idx[a], idx[b])]);
        for (a, c) in counts.values().enumerate() {
            system[(a, a)] += self.lambda / *c as f64;
        }
        let chol = Cholesky::factor(&system)?;
        let mut b = DMatrix::from_fn(g, u, |row, col| self.grid_cross[(row, idx[col])]);
        forward_cols(chol.l(), &mut b);
        let mut h = DMatrix::from_fn(r, u, |row, col| self.factor[(idx[col], row)]);
        forward_cols(chol.l(), &mut h);
        let embedding = &b * h.transpose();
        let sigma = (0..g)
            .map(|row| {
                let s: f64 = b.row(row).iter().map(|v| v * v).sum();
                (self.grid_diag[row] - s).max(0.0).sqrt()
            })
            .collect();
        Ok(ResampledFit { sigma, embedding })
    }

    /// `max_x CMMD(x) / (σ₁(x) + σ₂(x))` for one pair of resamples.
    pub(crate) fn replicate(&self, rng: &mut StreamRng) -> Result<f64> {
        let c1 = self.draw(rng);
        let c2 = self.draw(rng);
        let f1 = self.fit(&c1)?;
        let f2 = self.fit(&c2)?;
        let mut best: f64 = 0.0;
        for row in 0..self.grid_diag.len() {
            let d = (f1.embedding.row(row) - f2.embedding.row(row)).norm();
            best = best.max(ratio(d, f1.sigma[row] + f2.sigma[row]));
        }
        Ok(best)
    }
}

/// Naive resampling bootstrap.
pub fn naive_bootstrap(
    data: &DataSet,
    k: &KernelSpec,
    kappa: &KernelSpec,
    lambda: f64,
    cfg: &BootstrapConfig,
) -> Result<CalibrationResult> {
    let grid = prepare(data, k, kappa, lambda, cfg)?;
    let ctx = ResampleContext::new(data, grid, k, kappa, lambda);
    let stats = (0..cfg.replicates)
        .into_par_iter()
        .map(|m| ctx.replicate(&mut substream(cfg.seed, &[m as u64])))
        .collect::<Result<Vec<f64>>>()?;
    finish(stats, cfg, BootstrapMethod::Naive, 2 * cfg.replicates)
}

/// Quantities shared by every wild-bootstrap replicate.
pub(crate) struct WildContext {
    /// `G × n`; row `g` holds `v_x = (K+λI)⁻¹k(X,x)`.
    v: DMatrix<f64>,
    /// `n × r`; `(I − A) F`, the output-space residual factor.
    residual: DMatrix<f64>,
    /// Studentization per grid point.
    scale: Vec<f64>,
}

impl WildContext {
    pub(crate) fn new(
        data: &DataSet,
        grid: &Points,
        k: &KernelSpec,
        kappa: &KernelSpec,
        lambda: f64,
        studentized: bool,
    ) -> Result<Self> {
        let n = data.len();
        let mut system = gram_entries(k, data.covariates());
        for i in 0..n {
            system[(i, i)] += lambda;
        }
        let chol = Cholesky::factor(&system)?;
        let lambda_eff = lambda + chol.jitter();

        let mut v = cross_entries(k, grid, data.covariates());
        chol.forward_cols(&mut v);
        let sigma: Vec<f64> = grid
            .iter()
            .enumerate()
            .map(|(g, x)| (k.diag(x) - v.row(g).norm_squared()).max(0.0).sqrt())
            .collect();
        chol.backward_cols(&mut v);

        // I − A = λ(K+λI)⁻¹, applied to the output factor.
        let factor = pivoted_cholesky(&gram_entries(kappa, data.measurements()));
        let mut rt = factor.transpose();
        chol.forward_cols(&mut rt);
        chol.backward_cols(&mut rt);
        let residual = rt.transpose() * lambda_eff;

        let scale = if studentized {
            let res_sq: Vec<f64> = (0..n).map(|j| residual.row(j).norm_squared()).collect();
            (0..grid.len())
                .map(|g| v.row(g).iter().zip(&res_sq).map(|(a, r)| a * a * r).sum::<f64>().sqrt())
                .collect()
        } else {
            sigma
        };
        Ok(Self { v, residual, scale })
    }

    pub(crate) fn replicate(&self, rng: &mut StreamRng) -> f64 {
        let q = wild_multipliers(self.v.ncols(), rng);
        let mut weighted = self.residual.clone();
        for (j, qj) in q.iter().enumerate() {
            weighted.row_mut(j).scale_mut(*qj);
        }
        let m = &self.v * weighted;
        (0..self.scale.len())
            .map(|g| ratio(m.row(g).norm(), self.scale[g]))
            .fold(0.0, f64::max)
    }
}

fn wild_impl(
    data: &DataSet,
    k: &KernelSpec,
    kappa: &KernelSpec,
    lambda: f64,
    cfg: &BootstrapConfig,
    studentized: bool,
) -> Result<CalibrationResult> {
    let grid = prepare(data, k, kappa, lambda, cfg)?;
    let ctx = WildContext::new(data, grid, k, kappa, lambda, studentized)?;
    let stats: Vec<f64> = (0..cfg.replicates)
        .into_par_iter()
        .map(|m| ctx.replicate(&mut substream(cfg.seed, &[m as u64])))
        .collect();
    let method = if studentized { BootstrapMethod::WildStudentized } else { BootstrapMethod::Wild };
    finish(stats, cfg, method, 1)
}

/// Wild bootstrap with antisymmetric multipliers and a single fit.
pub fn wild_bootstrap(
    data: &DataSet,
    k: &KernelSpec,
    kappa: &KernelSpec,
    lambda: f64,
    cfg: &BootstrapConfig,
) -> Result<CalibrationResult> {
    wild_impl(data, k, kappa, lambda, cfg, false)
}

/// Wild bootstrap studentized by the residual-weighted scale
/// `√Σⱼ vₓ[j]²‖εⱼ‖²` instead of the posterior scale.
pub fn wild_bootstrap_studentized(
    data: &DataSet,
    k: &KernelSpec,
    kappa: &KernelSpec,
    lambda: f64,
    cfg: &BootstrapConfig,
) -> Result<CalibrationResult> {
    wild_impl(data, k, kappa, lambda, cfg, true)
}

pub fn bootstrap(
    method: BootstrapMethod,
    data: &DataSet,
    k: &KernelSpec,
    kappa: &KernelSpec,
    lambda: f64,
    cfg: &BootstrapConfig,
) -> Result<CalibrationResult> {
    match method {
        BootstrapMethod::Naive => naive_bootstrap(data, k, kappa, lambda, cfg),
        BootstrapMethod::Wild => wild_bootstrap(data, k, kappa, lambda, cfg),
        BootstrapMethod::WildStudentized => wild_bootstrap_studentized(data, k, kappa, lambda, cfg),
    }
}
