//! Kernel ridge regression with a diagonal operator-valued kernel `k · id`.
//!
//! For this kernel every output-space computation factors through scalar
//! quantities: the dual coefficients `α(x) = (K + λI)⁻¹ k(X, x)` and the
//! posterior scale `σ(x)² = k(x,x) − k(x,X) α(x)`. Measurements are kept raw;
//! the output kernel is applied lazily by the statistic module.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::kernels::{cross_entries, gram_entries, KernelSpec};
use crate::linalg::Cholesky;
use crate::points::{check_compatible, check_point, Points};

/// Ordered transition pairs `(covariate, measurement)`.
#[derive(Clone, Debug, PartialEq, Default)]
pub struct DataSet {
    covariates: Points,
    measurements: Points,
}

impl DataSet {
    pub fn new(covariates: Points, measurements: Points) -> Result<Self> {
        if covariates.len() != measurements.len() {
            return Err(Error::input(format!(
                "{} covariates but {} measurements",
                covariates.len(),
                measurements.len()
            )));
        }
        Ok(Self { covariates, measurements })
    }

    pub fn empty() -> Self {
        Self::default()
    }

    pub fn len(&self) -> usize {
        self.covariates.len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn covariates(&self) -> &Points {
        &self.covariates
    }

    pub fn measurements(&self) -> &Points {
        &self.measurements
    }

    pub fn push(&mut self, x: &[f64], z: &[f64]) -> Result<()> {
        if !self.covariates.is_empty() {
            check_point(&self.covariates, x)?;
            check_point(&self.measurements, z)?;
        }
        self.covariates.push(x)?;
        self.measurements.push(z)
    }

    pub fn select(&self, indices: &[usize]) -> DataSet {
        DataSet {
            covariates: self.covariates.select(indices),
            measurements: self.measurements.select(indices),
        }
    }

    /// Contiguous slice `[start, end)` of the pairs.
    pub fn window(&self, start: usize, end: usize) -> DataSet {
        let idx: Vec<usize> = (start..end).collect();
        self.select(&idx)
    }

    pub fn concat(&self, other: &DataSet) -> Result<DataSet> {
        Ok(DataSet {
            covariates: self.covariates.concat(&other.covariates)?,
            measurements: self.measurements.concat(&other.measurements)?,
        })
    }

    pub fn is_finite(&self) -> bool {
        self.covariates.is_finite() && self.measurements.is_finite()
    }
}

/// A KRR fit: the factorized regularized Gram matrix plus raw measurements.
#[derive(Clone, Debug)]
pub struct FittedModel {
    input_kernel: KernelSpec,
    output_kernel: KernelSpec,
    lambda: f64,
    covariates: Points,
    measurements: Points,
    chol: Cholesky,
}

fn check_lambda(lambda: f64) -> Result<()> {
    if !(lambda > 0.0 && lambda.is_finite()) {
        return Err(Error::parameter(format!("regularization must be positive, got {lambda}")));
    }
    Ok(())
}

/// Fits KRR with input kernel `k`, regularization `λ` and output kernel `κ`.
pub fn fit(data: &DataSet, k: &KernelSpec, lambda: f64, kappa: &KernelSpec) -> Result<FittedModel> {
    check_lambda(lambda)?;
    k.validate()?;
    kappa.validate()?;
    if !data.is_finite() {
        return Err(Error::input("data set contains non-finite values"));
    }
    let mut system = gram_entries(k, data.covariates());
    for i in 0..system.nrows() {
        system[(i, i)] += lambda;
    }
    let chol = Cholesky::factor(&system)?;
    Ok(FittedModel {
        input_kernel: *k,
        output_kernel: *kappa,
        lambda,
        covariates: data.covariates().clone(),
        measurements: data.measurements().clone(),
        chol,
    })
}

/// Dual coefficients and posterior scales for a batch of query points.
#[derive(Clone, Debug)]
pub struct QueryBatch {
    /// `G × n`; row `g` is `α(x_g)`.
    pub coefficients: DMatrix<f64>,
    /// `σ(x_g)` for each query.
    pub sigma: Vec<f64>,
}

impl FittedModel {
    pub fn len(&self) -> usize {
        self.covariates.len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn lambda(&self) -> f64 {
        self.lambda
    }

    pub fn input_kernel(&self) -> &KernelSpec {
        &self.input_kernel
    }

    pub fn output_kernel(&self) -> &KernelSpec {
        &self.output_kernel
    }

    pub fn covariates(&self) -> &Points {
        &self.covariates
    }

    pub fn measurements(&self) -> &Points {
        &self.measurements
    }

    /// Lower Cholesky factor of `K(X,X) + λI` (plus any jitter).
    pub fn cholesky(&self) -> &Cholesky {
        &self.chol
    }

    fn kernel_column(&self, x: &[f64]) -> Result<DVector<f64>> {
        check_point(&self.covariates, x)?;
        Ok(DVector::from_iterator(
            self.len(),
            self.covariates.iter().map(|xi| self.input_kernel.eval(xi, x)),
        ))
    }

    /// `α(x) = (K + λI)⁻¹ k(X, x)` via two triangular solves.
    pub fn dual_coefficients(&self, x: &[f64]) -> Result<DVector<f64>> {
        let kx = self.kernel_column(x)?;
        Ok(self.chol.solve(&kx))
    }

    /// Scalar prediction `α(x)ᵀ y`; requires one-dimensional measurements.
    pub fn predict_scalar(&self, x: &[f64]) -> Result<f64> {
        if !self.measurements.is_empty() && self.measurements.dim() != 1 {
            return Err(Error::misuse(format!(
                "scalar prediction needs 1-d measurements, model has dimension {}",
                self.measurements.dim()
            )));
        }
        let alpha = self.dual_coefficients(x)?;
        Ok(alpha.iter().zip(self.measurements.as_slice()).map(|(a, y)| a * y).sum())
    }

    /// Vector prediction `Σ αⱼ(x) zⱼ` in the raw measurement coordinates.
    pub fn predict_vector(&self, x: &[f64]) -> Result<Vec<f64>> {
        let alpha = self.dual_coefficients(x)?;
        let q = self.measurements.dim();
        let mut out = vec![0.0; q];
        for (a, z) in alpha.iter().zip(self.measurements.iter()) {
            for (o, zi) in out.iter_mut().zip(z) {
                *o += a * zi;
            }
        }
        Ok(out)
    }

    /// `σ(x) = √max(0, k(x,x) − k(x,X)ᵀ α(x))`.
    pub fn posterior_scale(&self, x: &[f64]) -> Result<f64> {
        let kx = self.kernel_column(x)?;
        let v = self.chol.forward(&kx);
        Ok((self.input_kernel.diag(x) - v.norm_squared()).max(0.0).sqrt())
    }

    /// Batched dual coefficients and posterior scales.
    pub fn query(&self, xs: &Points) -> Result<QueryBatch> {
        check_compatible(&self.covariates, xs)?;
        let mut coefficients = cross_entries(&self.input_kernel, xs, &self.covariates);
        self.chol.forward_cols(&mut coefficients);
        let sigma = (0..xs.len())
            .map(|g| {
                let s: f64 = coefficients.row(g).iter().map(|v| v * v).sum();
                (self.input_kernel.diag(xs.point(g)) - s).max(0.0).sqrt()
            })
            .collect();
        self.chol.backward_cols(&mut coefficients);
        Ok(QueryBatch { coefficients, sigma })
    }
}

/// Scalar-output KRR updated one pair at a time, tracking a fixed grid.
///
/// Appending a pair extends the Cholesky factor by one row, so each update
/// costs `O(n² + n·G)` for `n` pairs and `G` grid points. Predictions,
/// posterior scales and the log-determinant term are available after every
/// step.
#[derive(Clone, Debug)]
pub struct OnlineKrr {
    kernel: KernelSpec,
    lambda: f64,
    covariates: Points,
    rows: Vec<Vec<f64>>,
    whitened_targets: Vec<f64>,
    grid: Points,
    grid_rows: Vec<Vec<f64>>,
    grid_sq: Vec<f64>,
    grid_mean: Vec<f64>,
    log_diag_sum: f64,
}

impl OnlineKrr {
    pub fn new(kernel: KernelSpec, lambda: f64, grid: Points) -> Result<Self> {
        check_lambda(lambda)?;
        kernel.validate()?;
        let g = grid.len();
        Ok(Self {
            kernel,
            lambda,
            covariates: Points::empty(grid.dim()),
            rows: Vec::new(),
            whitened_targets: Vec::new(),
            grid,
            grid_rows: Vec::new(),
            grid_sq: vec![0.0; g],
            grid_mean: vec![0.0; g],
            log_diag_sum: 0.0,
        })
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    pub fn push(&mut self, x: &[f64], y: f64) -> Result<()> {
        if !self.grid.is_empty() {
            check_point(&self.grid, x)?;
        }
        let n = self.len();
        let mut row = Vec::with_capacity(n + 1);
        for (j, xj) in self.covariates.iter().enumerate() {
            let s: f64 = row.iter().zip(&self.rows[j]).map(|(a, b)| a * b).sum();
            row.push((self.kernel.eval(xj, x) - s) / self.rows[j][j]);
        }
        let pivot = self.kernel.diag(x) + self.lambda - row.iter().map(|v| v * v).sum::<f64>();
        if !(pivot > 0.0) {
            return Err(Error::numerical("online Cholesky update lost positive definiteness"));
        }
        let d = pivot.sqrt();
        let w = (y - row.iter().zip(&self.whitened_targets).map(|(a, b)| a * b).sum::<f64>()) / d;

        let mut grid_row: Vec<f64> = self.grid.iter().map(|xg| self.kernel.eval(x, xg)).collect();
        for (lj, prev) in row.iter().zip(&self.grid_rows) {
            for (t, p) in grid_row.iter_mut().zip(prev) {
                *t -= lj * p;
            }
        }
        for ((t, sq), mean) in grid_row.iter_mut().zip(&mut self.grid_sq).zip(&mut self.grid_mean) {
            *t /= d;
            *sq += *t * *t;
            *mean += *t * w;
        }

        row.push(d);
        self.rows.push(row);
        self.whitened_targets.push(w);
        self.grid_rows.push(grid_row);
        self.covariates.push(x)?;
        self.log_diag_sum += d.ln();
        Ok(())
    }

    /// KRR predictions on the grid.
    pub fn grid_predictions(&self) -> &[f64] {
        &self.grid_mean
    }

    /// Posterior scales on the grid.
    pub fn grid_sigma(&self) -> Vec<f64> {
        self.grid
            .iter()
            .zip(&self.grid_sq)
            .map(|(x, sq)| (self.kernel.diag(x) - sq).max(0.0).sqrt())
            .collect()
    }

    /// `½ log det(I + K/λ)` for the pairs seen so far.
    pub fn log_det_term(&self) -> f64 {
        self.log_diag_sum - 0.5 * self.len() as f64 * self.lambda.ln()
    }
}
