//! Random mean functions drawn from a finite-dimensional slice of an RKHS.

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::kernels::{gram_entries, KernelSpec};
use crate::points::{check_point, Points};
use crate::rng::substream;

const ANCHOR_RETRIES: usize = 10;

/// Axis-aligned cube `[low, high]^dim`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BoxDomain {
    pub dim: usize,
    pub low: f64,
    pub high: f64,
}

impl BoxDomain {
    pub fn new(dim: usize, low: f64, high: f64) -> Result<Self> {
        let d = Self { dim, low, high };
        d.validate()?;
        Ok(d)
    }

    pub fn validate(&self) -> Result<()> {
        if self.dim == 0 || !(self.low < self.high) || !self.low.is_finite() || !self.high.is_finite() {
            return Err(Error::parameter(format!(
                "domain needs dim >= 1 and finite low < high, got dim={} [{}, {}]",
                self.dim, self.low, self.high
            )));
        }
        Ok(())
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> Vec<f64> {
        (0..self.dim).map(|_| rng.random_range(self.low..=self.high)).collect()
    }

    pub fn contains(&self, x: &[f64]) -> bool {
        x.len() == self.dim && x.iter().all(|v| (self.low..=self.high).contains(v))
    }
}

/// `f = Σⱼ wⱼ k(·, aⱼ)`.
#[derive(Clone, Debug, PartialEq)]
pub struct RkhsFunction {
    pub anchors: Points,
    pub weights: Vec<f64>,
    pub spec: KernelSpec,
}

impl RkhsFunction {
    pub fn zero(spec: KernelSpec) -> Self {
        Self { anchors: Points::default(), weights: Vec::new(), spec }
    }

    /// The canonical feature `k(·, a)`.
    pub fn feature(spec: KernelSpec, anchor: &[f64]) -> Result<Self> {
        Ok(Self { anchors: Points::from_rows(&[anchor])?, weights: vec![1.0], spec })
    }

    pub fn eval(&self, x: &[f64]) -> f64 {
        self.anchors.iter().zip(&self.weights).map(|(a, w)| w * self.spec.eval(a, x)).sum()
    }

    pub fn norm(&self) -> f64 {
        let k = gram_entries(&self.spec, &self.anchors);
        let w = DVector::from_column_slice(&self.weights);
        (w.transpose() * k * &w)[(0, 0)].max(0.0).sqrt()
    }

    pub fn scaled(&self, c: f64) -> Self {
        Self { weights: self.weights.iter().map(|w| w * c).collect(), ..self.clone() }
    }

    /// Pointwise sum, as a function on the union of anchors.
    pub fn plus(&self, other: &RkhsFunction) -> Result<Self> {
        if self.spec != other.spec {
            return Err(Error::misuse("cannot add functions from different RKHSs"));
        }
        let mut weights = self.weights.clone();
        weights.extend_from_slice(&other.weights);
        Ok(Self { anchors: self.anchors.concat(&other.anchors)?, weights, spec: self.spec })
    }
}

/// Uniform draw from the sphere of radius `r` in `span{k(·, aⱼ)}` with `m`
/// anchors uniform on `domain`.
pub fn sample_rkhs_function(spec: &KernelSpec, domain: &BoxDomain, m: usize, r: f64, seed: u64) -> Result<RkhsFunction> {
    sample_rkhs_function_with(spec, domain, m, r, &mut substream(seed, &[]))
}

pub fn sample_rkhs_function_with<R: Rng + ?Sized>(
    spec: &KernelSpec,
    domain: &BoxDomain,
    m: usize,
    r: f64,
    rng: &mut R,
) -> Result<RkhsFunction> {
    spec.validate()?;
    domain.validate()?;
    if m == 0 {
        return Err(Error::parameter("mean function dimension must be at least 1"));
    }
    if !(r > 0.0 && r.is_finite()) {
        return Err(Error::parameter(format!("RKHS norm must be positive, got {r}")));
    }
    for _ in 0..ANCHOR_RETRIES {
        let rows: Vec<Vec<f64>> = (0..m).map(|_| domain.sample(rng)).collect();
        let anchors = Points::from_rows(&rows)?;
        let g: Vec<f64> = (0..m).map(|_| rng.sample(StandardNormal)).collect();
        let Some(chol) = gram_entries(spec, &anchors).cholesky() else {
            continue;
        };
        let gn = g.iter().map(|v| v * v).sum::<f64>().sqrt();
        if gn == 0.0 {
            continue;
        }
        // ‖f‖² = wᵀKw = ‖Lᵀw‖², so w = L⁻ᵀu with u uniform on the r-sphere.
        let u = DVector::from_iterator(m, g.iter().map(|v| r * v / gn));
        let l: DMatrix<f64> = chol.unpack();
        let Some(w) = l.transpose().solve_upper_triangular(&u) else {
            continue;
        };
        return Ok(RkhsFunction { anchors, weights: w.iter().copied().collect(), spec: *spec });
    }
    Err(Error::numerical(format!("anchor Gram matrix stayed singular after {ANCHOR_RETRIES} draws")))
}

/// Evaluates `f` on a point list.
pub fn eval_all(f: &RkhsFunction, xs: &Points) -> Result<Vec<f64>> {
    if let Some(x) = xs.iter().next() {
        check_point(&f.anchors, x)?;
    }
    Ok(xs.iter().map(|x| f.eval(x)).collect())
}
