//! Noisy orthonormal linear systems `X_{n+1} = A X_n + ε_n`.

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_distr::StandardNormal;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::linalg::{expm, haar_orthogonal, logm, trace_norm};
use crate::points::Points;
use crate::regression::DataSet;
use crate::rng::substream;

const ORTHONORMAL_TOL: f64 = 1e-10;

/// `‖AᵀA − I‖_F`.
pub fn orthonormality_drift(a: &DMatrix<f64>) -> f64 {
    (a.transpose() * a - DMatrix::identity(a.nrows(), a.ncols())).norm()
}

#[derive(Clone, Debug, PartialEq)]
pub struct LinearSystem {
    pub a: DMatrix<f64>,
    pub noise_std: f64,
    pub initial_state: DVector<f64>,
}

impl LinearSystem {
    /// Starts from `(1/√d)·(1,…,1)`.
    pub fn new(a: DMatrix<f64>, noise_std: f64) -> Result<Self> {
        let d = a.nrows();
        if d == 0 || !a.is_square() {
            return Err(Error::parameter("system matrix must be square and nonempty"));
        }
        if orthonormality_drift(&a) > ORTHONORMAL_TOL {
            return Err(Error::parameter("system matrix is not orthonormal"));
        }
        if !(noise_std >= 0.0 && noise_std.is_finite()) {
            return Err(Error::parameter(format!("noise_std must be nonnegative, got {noise_std}")));
        }
        let initial_state = DVector::from_element(d, 1.0 / (d as f64).sqrt());
        Ok(Self { a, noise_std, initial_state })
    }

    /// Haar-distributed `A ∈ O(d)`.
    pub fn random(d: usize, noise_std: f64, seed: u64) -> Result<Self> {
        if d == 0 {
            return Err(Error::parameter("dimension must be at least 1"));
        }
        Self::new(haar_orthogonal(d, &mut substream(seed, &[])), noise_std)
    }

    pub fn dim(&self) -> usize {
        self.a.nrows()
    }

    pub fn step<R: Rng + ?Sized>(&self, x: &DVector<f64>, rng: &mut R) -> DVector<f64> {
        let mut next = &self.a * x;
        if self.noise_std > 0.0 {
            for v in next.iter_mut() {
                *v += self.noise_std * rng.sample::<f64, _>(StandardNormal);
            }
        }
        next
    }
}

/// Appends `steps` transitions from `x` to `out` and returns the final state.
pub(crate) fn extend_trajectory<R: Rng + ?Sized>(
    sys: &LinearSystem,
    mut x: DVector<f64>,
    steps: usize,
    out: &mut DataSet,
    rng: &mut R,
) -> Result<DVector<f64>> {
    for _ in 0..steps {
        let next = sys.step(&x, rng);
        out.push(x.as_slice(), next.as_slice())?;
        x = next;
    }
    Ok(x)
}

/// Transition pairs `(X_n, X_{n+1})` for `n = 0..steps`.
pub fn simulate_system(sys: &LinearSystem, steps: usize, seed: u64) -> Result<DataSet> {
    if steps == 0 {
        return Err(Error::parameter("need at least one step"));
    }
    let d = sys.dim();
    let mut out = DataSet::new(Points::empty(d), Points::empty(d))?;
    extend_trajectory(sys, sys.initial_state.clone(), steps, &mut out, &mut substream(seed, &[]))?;
    Ok(out)
}

/// `count` independent trajectories of `steps` transitions, concatenated.
pub fn simulate_trajectories(sys: &LinearSystem, count: usize, steps: usize, seed: u64) -> Result<DataSet> {
    let d = sys.dim();
    let mut out = DataSet::new(Points::empty(d), Points::empty(d))?;
    for t in 0..count {
        out = out.concat(&simulate_system(sys, steps, crate::rng::derive_seed(seed, &[t as u64]))?)?;
    }
    Ok(out)
}

#[derive(Clone, Debug, Serialize)]
pub struct Perturbation {
    #[serde(skip)]
    pub a_prime: DMatrix<f64>,
    pub xi: f64,
    /// Which norm normalizes the generator.
    pub generator_norm: &'static str,
    /// `‖log(AᵀA′)‖_HS`.
    pub geodesic_distance: f64,
    /// `ξ‖H‖_HS/‖H‖₁`, the distance predicted by the displayed formula.
    pub predicted_distance: f64,
}

/// Random antisymmetric generator `H = (B − Bᵀ)/2`.
fn random_generator(d: usize, seed: u64) -> DMatrix<f64> {
    let mut rng = substream(seed, &[]);
    for _ in 0..64 {
        let b = DMatrix::from_fn(d, d, |_, _| rng.sample::<f64, _>(StandardNormal));
        let h = (&b - b.transpose()) * 0.5;
        if trace_norm(&h) > 0.0 {
            return h;
        }
    }
    DMatrix::zeros(d, d)
}

/// `A′ = A·exp((ξ/‖H‖₁)H)` with `‖·‖₁` the trace norm.
pub fn perturb_dynamics(a: &DMatrix<f64>, xi: f64, seed: u64) -> Result<Perturbation> {
    if !(xi >= 0.0 && xi.is_finite()) {
        return Err(Error::parameter(format!("perturbation magnitude must be nonnegative, got {xi}")));
    }
    let d = a.nrows();
    if xi == 0.0 || d < 2 {
        return Ok(Perturbation {
            a_prime: a.clone(),
            xi,
            generator_norm: "schatten-1",
            geodesic_distance: 0.0,
            predicted_distance: 0.0,
        });
    }
    let h = random_generator(d, seed);
    let h1 = trace_norm(&h);
    if h1 == 0.0 {
        return Err(Error::numerical("could not draw a nonzero generator"));
    }
    let a_prime = a * expm(&(&h * (xi / h1)));
    let geodesic_distance = geodesic_distance(a, &a_prime)?;
    Ok(Perturbation {
        a_prime,
        xi,
        generator_norm: "schatten-1",
        geodesic_distance,
        predicted_distance: xi * h.norm() / h1,
    })
}

/// `‖log(AᵀB)‖_HS`.
pub fn geodesic_distance(a: &DMatrix<f64>, b: &DMatrix<f64>) -> Result<f64> {
    Ok(logm(&(a.transpose() * b))?.norm())
}
