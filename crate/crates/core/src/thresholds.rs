//! Analytical confidence multipliers β.
//!
//! Two variants: a time-uniform bound for online sampling, driven by
//! `log det(I + K/λ)`, and a fixed-time bound for independent pairs, driven
//! by the spectrum of the Gram matrix.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::kernels::GramMatrix;
use crate::linalg::Cholesky;

fn one() -> f64 {
    1.0
}

/// Noise and norm assumptions behind an analytical threshold.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ThresholdParams {
    /// Upper bound on the RKHS norm of the mean function.
    pub s: f64,
    /// Subgaussian scale.
    pub rho: f64,
    /// Trace of the online variance proxy.
    #[serde(default = "one")]
    pub trace_rv: f64,
    #[serde(default = "one")]
    pub trace_rg: f64,
    #[serde(default = "one")]
    pub hs_rg: f64,
    #[serde(default = "one")]
    pub op_rg: f64,
    pub delta: f64,
}

impl ThresholdParams {
    /// Scalar outputs: all variance-proxy norms equal one.
    pub fn scalar(s: f64, rho: f64, delta: f64) -> Self {
        Self { s, rho, trace_rv: 1.0, trace_rg: 1.0, hs_rg: 1.0, op_rg: 1.0, delta }
    }

    pub fn with_delta(self, delta: f64) -> Self {
        Self { delta, ..self }
    }

    pub fn validate(&self) -> Result<()> {
        let mut problems = Vec::new();
        if !(self.delta > 0.0 && self.delta < 1.0) {
            problems.push(format!("delta must lie in (0,1), got {}", self.delta));
        }
        if !(self.rho > 0.0 && self.rho.is_finite()) {
            problems.push(format!("rho must be positive, got {}", self.rho));
        }
        if !(self.s >= 0.0 && self.s.is_finite()) {
            problems.push(format!("s must be nonnegative, got {}", self.s));
        }
        if !(self.trace_rv > 0.0 && self.trace_rv.is_finite()) {
            problems.push(format!("trace_rv must be positive, got {}", self.trace_rv));
        }
        if !(self.op_rg >= 0.0 && self.op_rg <= self.hs_rg && self.hs_rg <= self.trace_rg && self.trace_rg.is_finite())
        {
            problems.push("need 0 <= op_rg <= hs_rg <= trace_rg".to_string());
        }
        if problems.is_empty() {
            Ok(())
        } else {
            Err(Error::parameter(problems.join("; ")))
        }
    }
}

fn check_lambda(lambda: f64) -> Result<()> {
    if !(lambda > 0.0 && lambda.is_finite()) {
        return Err(Error::parameter(format!("regularization must be positive, got {lambda}")));
    }
    Ok(())
}

/// `½ log det(I + K/λ)`.
pub fn log_det_term(gram: &GramMatrix, lambda: f64) -> Result<f64> {
    check_lambda(lambda)?;
    let n = gram.len();
    if n == 0 {
        return Ok(0.0);
    }
    let mut a = gram.entries() / lambda;
    for i in 0..n {
        a[(i, i)] += 1.0;
    }
    let chol = Cholesky::factor(&a)?;
    Ok((0.5 * chol.log_det()).max(0.0))
}

/// Time-uniform multiplier for online sampling.
pub fn beta_online(params: &ThresholdParams, gram: &GramMatrix, lambda: f64) -> Result<f64> {
    params.validate()?;
    let ld = log_det_term(gram, lambda)?;
    Ok(beta_online_from_log_det(params, ld, lambda))
}

/// `β` from a precomputed `½ log det(I + K/λ)`, e.g. from an online model.
pub fn beta_online_from_log_det(params: &ThresholdParams, log_det: f64, lambda: f64) -> f64 {
    let inner = 2.0 * params.trace_rv * ((1.0 / params.delta).ln() + log_det);
    params.s + params.rho / lambda.sqrt() * inner.sqrt()
}

/// Trace, Hilbert–Schmidt and operator norms of the noise operator `T`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SpectralNorms {
    pub trace: f64,
    pub hs: f64,
    pub op: f64,
}

pub fn spectral_t_norms(
    gram: &GramMatrix,
    lambda: f64,
    rho: f64,
    trace_rg: f64,
    hs_rg: f64,
    op_rg: f64,
) -> Result<SpectralNorms> {
    check_lambda(lambda)?;
    if !(rho > 0.0) || trace_rg < 0.0 || hs_rg < 0.0 || op_rg < 0.0 {
        return Err(Error::parameter("noise scales must be nonnegative and rho positive"));
    }
    Ok(norms_from_eigenvalues(&gram.eigenvalues(), lambda, rho, trace_rg, hs_rg, op_rg))
}

fn norms_from_eigenvalues(mu: &[f64], lambda: f64, rho: f64, trace_rg: f64, hs_rg: f64, op_rg: f64) -> SpectralNorms {
    let r: Vec<f64> = mu.iter().map(|&m| m.max(0.0) / (m.max(0.0) + lambda)).collect();
    let rho2 = rho * rho;
    SpectralNorms {
        trace: rho2 * trace_rg * r.iter().sum::<f64>(),
        hs: rho2 * hs_rg * r.iter().map(|v| v * v).sum::<f64>().sqrt(),
        op: rho2 * op_rg * r.iter().copied().fold(0.0, f64::max),
    }
}

/// Fixed-time multiplier for independent pairs.
pub fn beta_fixed(params: &ThresholdParams, gram: &GramMatrix, lambda: f64) -> Result<f64> {
    params.validate()?;
    let t = spectral_t_norms(gram, lambda, params.rho, params.trace_rg, params.hs_rg, params.op_rg)?;
    Ok(beta_fixed_from_norms(params, &t, lambda))
}

pub(crate) fn beta_fixed_from_norms(params: &ThresholdParams, t: &SpectralNorms, lambda: f64) -> f64 {
    let l = (1.0 / params.delta).ln();
    let inner = t.trace + 2.0 * l.sqrt() * t.hs + 2.0 * l * t.op;
    params.s + inner.max(0.0).sqrt() / lambda.sqrt()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::kernels::{gram, KernelSpec};
    use crate::points::Points;
    use crate::rng::substream;
    use nalgebra::DMatrix;
    use rand::Rng;
    use std::f64::consts::E;

    fn random_gram(n: usize, seed: u64) -> GramMatrix {
        let mut rng = substream(seed, &[]);
        let xs: Vec<[f64; 2]> = (0..n).map(|_| [rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)]).collect();
        gram(&KernelSpec::gaussian(0.25).unwrap(), &Points::from_rows(&xs).unwrap()).unwrap()
    }

    fn one_point() -> GramMatrix {
        gram(&KernelSpec::gaussian(1.0).unwrap(), &Points::from_rows(&[[0.0]]).unwrap()).unwrap()
    }

    fn empty() -> GramMatrix {
        gram(&KernelSpec::gaussian(1.0).unwrap(), &Points::empty(1)).unwrap()
    }

    #[test]
    fn log_det_examples() {
        assert_eq!(log_det_term(&empty(), 1.0).unwrap(), 0.0);
        assert!((log_det_term(&one_point(), 1.0).unwrap() - 0.5 * 2f64.ln()).abs() < 1e-12);
        for seed in 0..20 {
            let g = random_gram(1 + seed as usize % 10, seed);
            let oracle: f64 = 0.5 * g.eigenvalues().iter().map(|m| (1.0 + m / 0.3).ln()).sum::<f64>();
            assert!((log_det_term(&g, 0.3).unwrap() - oracle).abs() < 1e-9);
        }
    }

    #[test]
    fn log_det_grows_under_append() {
        for seed in 0..20 {
            let g = random_gram(15, 100 + seed);
            let mut last = 0.0;
            for n in 1..=15 {
                let sub: Vec<usize> = (0..n).collect();
                let gs = gram(&g.spec(), &g.points().select(&sub)).unwrap();
                let v = log_det_term(&gs, 0.1).unwrap();
                assert!(v >= last - 1e-12);
                last = v;
            }
        }
    }

    #[test]
    fn online_examples() {
        let p = ThresholdParams::scalar(1.0, 1.0, 1.0 / E);
        assert!((beta_online(&p, &empty(), 1.0).unwrap() - (1.0 + 2f64.sqrt())).abs() < 1e-12);
        let p = ThresholdParams::scalar(0.0, 1.0, 1.0 / E);
        let v = beta_online(&p, &one_point(), 1.0).unwrap();
        assert!((v - (2.0 * (1.0 + 0.5 * 2f64.ln())).sqrt()).abs() < 1e-12);
        assert!((v - 1.64105).abs() < 1e-4);
    }

    #[test]
    fn fixed_examples() {
        assert_eq!(
            spectral_t_norms(&empty(), 1.0, 1.0, 1.0, 1.0, 1.0).unwrap(),
            SpectralNorms { trace: 0.0, hs: 0.0, op: 0.0 }
        );
        let t = spectral_t_norms(&one_point(), 1.0, 1.0, 1.0, 1.0, 1.0).unwrap();
        assert!((t.trace - 0.5).abs() < 1e-12 && (t.hs - 0.5).abs() < 1e-12 && (t.op - 0.5).abs() < 1e-12);
        let p = ThresholdParams::scalar(0.0, 1.0, 1.0 / E);
        assert!((beta_fixed(&p, &one_point(), 1.0).unwrap() - 2.5f64.sqrt()).abs() < 1e-12);
        let p = ThresholdParams::scalar(0.7, 1.0, 0.1);
        assert_eq!(beta_fixed(&p, &empty(), 1.0).unwrap(), 0.7);
    }

    #[test]
    fn monotone_in_delta() {
        let g = random_gram(10, 3);
        let mut last = (f64::INFINITY, f64::INFINITY);
        for delta in [0.01, 0.05, 0.1, 0.3, 0.9] {
            let p = ThresholdParams::scalar(0.5, 0.2, delta);
            let b = (beta_online(&p, &g, 0.1).unwrap(), beta_fixed(&p, &g, 0.1).unwrap());
            assert!(b.0 <= last.0 && b.1 <= last.1 && b.1 >= 0.5);
            last = b;
        }
    }

    #[test]
    fn invalid_params_are_rejected() {
        for delta in [0.0, 1.0, -0.1] {
            let p = ThresholdParams::scalar(1.0, 1.0, delta);
            assert!(matches!(beta_online(&p, &empty(), 1.0), Err(Error::Parameter(_))));
            assert!(matches!(beta_fixed(&p, &empty(), 1.0), Err(Error::Parameter(_))));
        }
        let p = ThresholdParams { op_rg: 2.0, ..ThresholdParams::scalar(1.0, 1.0, 0.1) };
        assert!(p.validate().is_err());
    }

    /// Explicit assembly of `T = (V+λ)^{-1/2} K(·,X)(R⊗I)K(·,X)* (V+λ)^{-1/2}`
    /// for a linear input kernel with finite feature map and outputs in ℝ^q,
    /// with `R` a given q×q covariance.
    fn brute_force(xs: &[Vec<f64>], offset: f64, r: &DMatrix<f64>, lambda: f64) -> (f64, f64, f64) {
        let n = xs.len();
        let q = r.nrows();
        let p = xs[0].len() + 1;
        let phi = |x: &[f64]| {
            let mut v = vec![offset.sqrt()];
            v.extend_from_slice(x);
            v
        };
        // Feature-space operator K(·,X): ℝ^{qn} → ℝ^{pq}, column (j,i) = φ(x_j) ⊗ e_i.
        let mut kx = DMatrix::zeros(p * q, q * n);
        for (j, x) in xs.iter().enumerate() {
            let f = phi(x);
            for i in 0..q {
                for (a, fa) in f.iter().enumerate() {
                    kx[(a * q + i, j * q + i)] = *fa;
                }
            }
        }
        let v = &kx * kx.transpose();
        let mut reg = v.clone();
        for i in 0..p * q {
            reg[(i, i)] += lambda;
        }
        let eig = reg.symmetric_eigen();
        let inv_sqrt = &eig.eigenvectors
            * DMatrix::from_diagonal(&eig.eigenvalues.map(|e| 1.0 / e.sqrt()))
            * eig.eigenvectors.transpose();
        let mut noise = DMatrix::zeros(q * n, q * n);
        for j in 0..n {
            noise.view_mut((j * q, j * q), (q, q)).copy_from(r);
        }
        let t = &inv_sqrt * &kx * noise * kx.transpose() * &inv_sqrt;
        let ev = t.symmetric_eigen().eigenvalues;
        let trace = ev.iter().sum::<f64>();
        let hs = ev.iter().map(|e| e * e).sum::<f64>().sqrt();
        let op = ev.iter().copied().fold(f64::MIN, f64::max);
        (trace, hs, op)
    }

    #[test]
    fn spectral_norms_match_brute_force_assembly() {
        for seed in 0..30 {
            let mut rng = substream(seed, &[9]);
            let n = 1 + rng.random_range(0..10);
            let q = 1 + rng.random_range(0..3);
            let d = 1 + rng.random_range(0..3);
            let lambda = rng.random_range(0.05..2.0);
            let rho: f64 = rng.random_range(0.1..2.0);
            let xs: Vec<Vec<f64>> = (0..n).map(|_| (0..d).map(|_| rng.random_range(-1.0..1.0)).collect()).collect();
            let b = DMatrix::from_fn(q, q, |_, _| rng.random_range(-1.0..1.0));
            let rg = &b * b.transpose();
            let nu = rg.clone().symmetric_eigen().eigenvalues;
            let tr = nu.sum();
            let hs = nu.norm();
            let op = nu.max();
            let spec = KernelSpec::linear(1.0).unwrap();
            let g = gram(&spec, &Points::from_rows(&xs).unwrap()).unwrap();
            let fast = spectral_t_norms(&g, lambda, rho, tr, hs, op).unwrap();
            let (bt, bh, bo) = brute_force(&xs, 1.0, &(rg * rho * rho), lambda);
            assert!((fast.trace - bt).abs() < 1e-8, "seed {seed}");
            assert!((fast.op - bo).abs() < 1e-8, "seed {seed}");
            assert!((fast.hs - bh).abs() < 1e-8, "seed {seed}");
        }
    }
}
