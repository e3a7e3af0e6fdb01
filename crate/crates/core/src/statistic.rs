//! The CMMD statistic `‖f₁(x) − f₂(x)‖` in the output RKHS.

use nalgebra::DMatrix;

use crate::error::{Error, Result};
use crate::kernels::{cross_entries, gram_entries, KernelSpec};
use crate::points::{check_compatible, Points};
use crate::regression::FittedModel;

fn check_pair(m1: &FittedModel, m2: &FittedModel) -> Result<()> {
    if m1.output_kernel() != m2.output_kernel() {
        return Err(Error::misuse("models use different output kernels"));
    }
    if m1.input_kernel() != m2.input_kernel() {
        return Err(Error::misuse("models use different input kernels"));
    }
    check_compatible(m1.covariates(), m2.covariates())?;
    check_compatible(m1.measurements(), m2.measurements())
}

/// Output-kernel cross-Grams of a model pair, computed once and reused.
#[derive(Clone, Debug)]
pub struct CmmdContext<'a> {
    m1: &'a FittedModel,
    m2: &'a FittedModel,
    c11: DMatrix<f64>,
    c12: DMatrix<f64>,
    c22: DMatrix<f64>,
}

impl<'a> CmmdContext<'a> {
    pub fn new(m1: &'a FittedModel, m2: &'a FittedModel) -> Result<Self> {
        check_pair(m1, m2)?;
        let kappa = m1.output_kernel();
        Ok(Self {
            m1,
            m2,
            c11: gram_entries(kappa, m1.measurements()),
            c12: cross_entries(kappa, m1.measurements(), m2.measurements()),
            c22: gram_entries(kappa, m2.measurements()),
        })
    }

    /// CMMD from precomputed dual coefficients.
    pub fn from_coefficients(&self, a1: &[f64], a2: &[f64]) -> f64 {
        quadratic_form(&self.c11, &self.c12, &self.c22, a1, a2)
    }

    pub fn at(&self, x: &[f64]) -> Result<f64> {
        let a1 = self.m1.dual_coefficients(x)?;
        let a2 = self.m2.dual_coefficients(x)?;
        Ok(self.from_coefficients(a1.as_slice(), a2.as_slice()))
    }

    pub fn profile(&self, xs: &Points) -> Result<Vec<f64>> {
        xs.iter().map(|x| self.at(x)).collect()
    }
}

/// `aᵀCb` summed in both loop orders and averaged, so that swapping the two
/// models, or comparing a model with itself, is exact in floating point.
fn cross_term(c: &DMatrix<f64>, a: &[f64], b: &[f64]) -> f64 {
    let mut by_row = 0.0;
    for (i, ai) in a.iter().enumerate() {
        let mut s = 0.0;
        for (j, bj) in b.iter().enumerate() {
            s += (ai * bj) * c[(i, j)];
        }
        by_row += s;
    }
    0.5 * (by_row + bilinear_products(c, a, b))
}

fn bilinear_products(c: &DMatrix<f64>, a: &[f64], b: &[f64]) -> f64 {
    let mut by_col = 0.0;
    for (j, bj) in b.iter().enumerate() {
        let mut s = 0.0;
        for (i, ai) in a.iter().enumerate() {
            s += (ai * bj) * c[(i, j)];
        }
        by_col += s;
    }
    by_col
}

fn quadratic_form(c11: &DMatrix<f64>, c12: &DMatrix<f64>, c22: &DMatrix<f64>, a1: &[f64], a2: &[f64]) -> f64 {
    let q = (cross_term(c11, a1, a1) + cross_term(c22, a2, a2)) - 2.0 * cross_term(c12, a1, a2);
    q.max(0.0).sqrt()
}

/// CMMD between two fitted models at one covariate.
pub fn cmmd(m1: &FittedModel, m2: &FittedModel, x: &[f64]) -> Result<f64> {
    CmmdContext::new(m1, m2)?.at(x)
}

/// CMMD at each point of `xs`, sharing the cross-Grams across queries.
pub fn cmmd_profile(m1: &FittedModel, m2: &FittedModel, xs: &Points) -> Result<Vec<f64>> {
    let ctx = CmmdContext::new(m1, m2)?;
    check_compatible(m1.covariates(), xs)?;
    ctx.profile(xs)
}

/// Explicit feature map `φ` with `κ(z, w) = ⟨φ(z), φ(w)⟩`, where one exists
/// in closed form: linear kernels of any dimension and polynomial kernels on
/// scalar measurements.
pub fn explicit_features(kappa: &KernelSpec, z: &[f64]) -> Result<Vec<f64>> {
    match *kappa {
        KernelSpec::LinearInhomogeneous { offset } => {
            let mut phi = Vec::with_capacity(z.len() + 1);
            phi.push(offset.sqrt());
            phi.extend_from_slice(z);
            Ok(phi)
        }
        KernelSpec::PolynomialInhomogeneous { degree, offset } if z.len() == 1 => {
            let m = degree as i32;
            let mut binom = 1.0;
            let mut out = Vec::with_capacity(degree as usize + 1);
            for k in 0..=m {
                if k > 0 {
                    binom *= f64::from(m - k + 1) / f64::from(k);
                }
                out.push((binom * offset.powi(m - k)).sqrt() * z[0].powi(k));
            }
            Ok(out)
        }
        _ => Err(Error::misuse("no explicit feature map for this output kernel")),
    }
}

/// Mean embedding `Σ αⱼ(x) φ(zⱼ)` in explicit feature coordinates.
pub fn explicit_embedding(model: &FittedModel, x: &[f64]) -> Result<Vec<f64>> {
    let alpha = model.dual_coefficients(x)?;
    let kappa = model.output_kernel();
    let mut out: Option<Vec<f64>> = None;
    for (a, z) in alpha.iter().zip(model.measurements().iter()) {
        let phi = explicit_features(kappa, z)?;
        let acc = out.get_or_insert_with(|| vec![0.0; phi.len()]);
        for (o, p) in acc.iter_mut().zip(&phi) {
            *o += a * p;
        }
    }
    Ok(out.unwrap_or_default())
}

/// CMMD through explicit features; a cross-check for the kernel-trick path.
pub fn cmmd_explicit(m1: &FittedModel, m2: &FittedModel, x: &[f64]) -> Result<f64> {
    check_pair(m1, m2)?;
    let e1 = explicit_embedding(m1, x)?;
    let e2 = explicit_embedding(m2, x)?;
    let len = e1.len().max(e2.len());
    let get = |e: &[f64], i: usize| e.get(i).copied().unwrap_or(0.0);
    Ok((0..len).map(|i| (get(&e1, i) - get(&e2, i)).powi(2)).sum::<f64>().sqrt())
}
