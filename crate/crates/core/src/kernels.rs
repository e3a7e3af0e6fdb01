//! Scalar positive-definite kernels and the Gram matrices built from them.
//!
//! The same [`KernelSpec`] type serves both roles in the tests: the input
//! kernel `k` on covariates and the output kernel `κ` on measurements.

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::points::{check_compatible, Points};

fn default_offset() -> f64 {
    1.0
}

/// A parameterized scalar kernel.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "snake_case", deny_unknown_fields)]
pub enum KernelSpec {
    /// `exp(-‖x-y‖² / (2γ²))`, with `bandwidth = γ²`.
    Gaussian { bandwidth: f64 },
    /// `c + ⟨x, y⟩`.
    LinearInhomogeneous {
        #[serde(default = "default_offset")]
        offset: f64,
    },
    /// `(c + ⟨x, y⟩)^m`.
    PolynomialInhomogeneous {
        degree: u32,
        #[serde(default = "default_offset")]
        offset: f64,
    },
}

impl KernelSpec {
    pub fn gaussian(bandwidth: f64) -> Result<Self> {
        let spec = KernelSpec::Gaussian { bandwidth };
        spec.validate()?;
        Ok(spec)
    }

    pub fn linear(offset: f64) -> Result<Self> {
        let spec = KernelSpec::LinearInhomogeneous { offset };
        spec.validate()?;
        Ok(spec)
    }

    pub fn polynomial(degree: u32, offset: f64) -> Result<Self> {
        let spec = KernelSpec::PolynomialInhomogeneous { degree, offset };
        spec.validate()?;
        Ok(spec)
    }

    pub fn validate(&self) -> Result<()> {
        match *self {
            KernelSpec::Gaussian { bandwidth } if !(bandwidth > 0.0 && bandwidth.is_finite()) => {
                Err(Error::parameter(format!("gaussian bandwidth must be positive, got {bandwidth}")))
            }
            KernelSpec::LinearInhomogeneous { offset }
            | KernelSpec::PolynomialInhomogeneous { offset, .. }
                if !(offset >= 0.0 && offset.is_finite()) =>
            {
                Err(Error::parameter(format!("kernel offset must be nonnegative, got {offset}")))
            }
            KernelSpec::PolynomialInhomogeneous { degree: 0, .. } => {
                Err(Error::parameter("polynomial degree must be at least 1"))
            }
            _ => Ok(()),
        }
    }

    /// Kernel value without dimension checks; `x` and `y` must have equal length.
    #[inline]
    pub fn eval(&self, x: &[f64], y: &[f64]) -> f64 {
        match *self {
            KernelSpec::Gaussian { bandwidth } => {
                let d2: f64 = x.iter().zip(y).map(|(a, b)| (a - b) * (a - b)).sum();
                (-d2 / (2.0 * bandwidth)).exp()
            }
            KernelSpec::LinearInhomogeneous { offset } => offset + dot(x, y),
            KernelSpec::PolynomialInhomogeneous { degree, offset } => {
                (offset + dot(x, y)).powi(degree as i32)
            }
        }
    }

    /// `k(x, y)`, rejecting points of different dimension.
    pub fn evaluate(&self, x: &[f64], y: &[f64]) -> Result<f64> {
        if x.len() != y.len() {
            return Err(Error::input(format!(
                "kernel arguments have dimensions {} and {}",
                x.len(),
                y.len()
            )));
        }
        Ok(self.eval(x, y))
    }

    #[inline]
    pub fn diag(&self, x: &[f64]) -> f64 {
        match self {
            KernelSpec::Gaussian { .. } => 1.0,
            _ => self.eval(x, x),
        }
    }
}

#[inline]
fn dot(x: &[f64], y: &[f64]) -> f64 {
    x.iter().zip(y).map(|(a, b)| a * b).sum()
}

/// Symmetric kernel matrix over one point list.
#[derive(Clone, Debug)]
pub struct GramMatrix {
    entries: DMatrix<f64>,
    spec: KernelSpec,
    points: Points,
}

impl GramMatrix {
    pub fn entries(&self) -> &DMatrix<f64> {
        &self.entries
    }

    pub fn spec(&self) -> KernelSpec {
        self.spec
    }

    pub fn points(&self) -> &Points {
        &self.points
    }

    pub fn len(&self) -> usize {
        self.entries.nrows()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn max_diagonal(&self) -> f64 {
        self.entries.diagonal().iter().copied().fold(0.0, f64::max)
    }

    /// Eigenvalues in ascending order.
    pub fn eigenvalues(&self) -> Vec<f64> {
        crate::linalg::symmetric_eigenvalues(&self.entries)
    }

    /// PSD check with tolerance `n · 1e-10 · max diagonal`.
    pub fn is_psd(&self) -> bool {
        if self.is_empty() {
            return true;
        }
        let tol = self.len() as f64 * 1e-10 * self.max_diagonal();
        self.eigenvalues().first().is_none_or(|&min| min >= -tol)
    }

    pub fn into_entries(self) -> DMatrix<f64> {
        self.entries
    }
}

/// Gram matrix `[k(xᵢ, xⱼ)]` of a point list; the empty list gives a 0×0 matrix.
pub fn gram(spec: &KernelSpec, points: &Points) -> Result<GramMatrix> {
    spec.validate()?;
    let entries = gram_entries(spec, points);
    Ok(GramMatrix { entries, spec: *spec, points: points.clone() })
}

pub(crate) fn gram_entries(spec: &KernelSpec, points: &Points) -> DMatrix<f64> {
    let n = points.len();
    let mut m = DMatrix::zeros(n, n);
    for j in 0..n {
        let pj = points.point(j);
        for i in j..n {
            let v = spec.eval(points.point(i), pj);
            m[(i, j)] = v;
            m[(j, i)] = v;
        }
    }
    m
}

/// `|left| × |right|` matrix of pairwise kernel values.
pub fn cross_gram(spec: &KernelSpec, left: &Points, right: &Points) -> Result<DMatrix<f64>> {
    spec.validate()?;
    check_compatible(left, right)?;
    Ok(cross_entries(spec, left, right))
}

pub(crate) fn cross_entries(spec: &KernelSpec, left: &Points, right: &Points) -> DMatrix<f64> {
    DMatrix::from_fn(left.len(), right.len(), |i, j| {
        spec.eval(left.point(i), right.point(j))
    })
}
