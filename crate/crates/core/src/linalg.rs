//! Dense linear-algebra helpers on top of nalgebra.
//!
//! Multi right-hand-side solves use a "column-per-unknown" layout: a `G × n`
//! matrix whose column `j` holds the `j`-th unknown for all `G` systems. The
//! inner loops then run over contiguous memory.

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};

/// Jitter escalations attempted after the plain factorization fails.
const JITTER_ESCALATIONS: usize = 3;

/// Lower Cholesky factor of an SPD matrix, possibly with diagonal jitter.
#[derive(Clone, Debug)]
pub struct Cholesky {
    l: DMatrix<f64>,
    jitter: f64,
}

impl Cholesky {
    /// Factors `a`, falling back to `a + εI` with `ε = 1e-12·tr(a)/n`
    /// escalated ×10 up to three times.
    pub fn factor(a: &DMatrix<f64>) -> Result<Self> {
        let n = a.nrows();
        if n == 0 {
            return Ok(Self { l: DMatrix::zeros(0, 0), jitter: 0.0 });
        }
        if let Some(c) = a.clone().cholesky() {
            return Ok(Self { l: c.unpack(), jitter: 0.0 });
        }
        let trace = a.trace();
        let mut jitter = if trace > 0.0 { 1e-12 * trace / n as f64 } else { 1e-12 };
        for _ in 0..JITTER_ESCALATIONS {
            let mut shifted = a.clone();
            for i in 0..n {
                shifted[(i, i)] += jitter;
            }
            if let Some(c) = shifted.cholesky() {
                return Ok(Self { l: c.unpack(), jitter });
            }
            jitter *= 10.0;
        }
        Err(Error::numerical(format!(
            "Cholesky factorization of a {n}x{n} matrix failed after jitter escalation"
        )))
    }

    pub fn l(&self) -> &DMatrix<f64> {
        &self.l
    }

    /// Diagonal jitter that was added, 0 when the plain factorization succeeded.
    pub fn jitter(&self) -> f64 {
        self.jitter
    }

    pub fn dim(&self) -> usize {
        self.l.nrows()
    }

    /// Solves `L y = b`.
    pub fn forward(&self, b: &DVector<f64>) -> DVector<f64> {
        let mut y = b.clone();
        let n = self.dim();
        for i in 0..n {
            let mut s = y[i];
            for j in 0..i {
                s -= self.l[(i, j)] * y[j];
            }
            y[i] = s / self.l[(i, i)];
        }
        y
    }

    /// Solves `Lᵀ x = y`.
    pub fn backward(&self, y: &DVector<f64>) -> DVector<f64> {
        let mut x = y.clone();
        let n = self.dim();
        for i in (0..n).rev() {
            let col = self.l.column(i);
            let mut s = x[i];
            for j in i + 1..n {
                s -= col[j] * x[j];
            }
            x[i] = s / col[i];
        }
        x
    }

    /// Solves `L Lᵀ x = b` with two triangular solves.
    pub fn solve(&self, b: &DVector<f64>) -> DVector<f64> {
        self.backward(&self.forward(b))
    }

    /// `log det(L Lᵀ)`.
    pub fn log_det(&self) -> f64 {
        2.0 * self.l.diagonal().iter().map(|d| d.ln()).sum::<f64>()
    }

    /// In place `B ← B L⁻ᵀ`, i.e. each row `b` of `B` becomes `L⁻¹ b`.
    pub fn forward_cols(&self, b: &mut DMatrix<f64>) {
        forward_cols(&self.l, b);
    }

    /// In place `B ← B L⁻¹`, i.e. each row `b` of `B` becomes `L⁻ᵀ b`.
    pub fn backward_cols(&self, b: &mut DMatrix<f64>) {
        backward_cols(&self.l, b);
    }
}

const BLOCK: usize = 32;

/// Row-wise forward substitution in the column-per-unknown layout.
///
/// Blocked so that off-diagonal updates run through matrix products.
pub(crate) fn forward_cols(l: &DMatrix<f64>, b: &mut DMatrix<f64>) {
    let n = l.nrows();
    debug_assert_eq!(b.ncols(), n);
    let lt = if n > BLOCK { l.transpose() } else { DMatrix::zeros(0, 0) };
    let mut i0 = 0;
    while i0 < n {
        let i1 = (i0 + BLOCK).min(n);
        if i0 > 0 {
            let (done, mut blk) = b.columns_range_pair_mut(0..i0, i0..i1);
            blk.gemm(-1.0, &done, &lt.view((0, i0), (i0, i1 - i0)), 1.0);
        }
        forward_block(l, b, i0, i1);
        i0 = i1;
    }
}

fn forward_block(l: &DMatrix<f64>, b: &mut DMatrix<f64>, i0: usize, i1: usize) {
    let g = b.nrows();
    let data = b.as_mut_slice();
    for i in i0..i1 {
        let (done, rest) = data.split_at_mut(i * g);
        let target = &mut rest[..g];
        for j in i0..i {
            let lij = l[(i, j)];
            if lij != 0.0 {
                for (t, s) in target.iter_mut().zip(&done[j * g..(j + 1) * g]) {
                    *t -= lij * s;
                }
            }
        }
        let inv = 1.0 / l[(i, i)];
        for t in target.iter_mut() {
            *t *= inv;
        }
    }
}

/// Row-wise backward substitution (`Lᵀ`) in the column-per-unknown layout.
pub(crate) fn backward_cols(l: &DMatrix<f64>, b: &mut DMatrix<f64>) {
    let n = l.nrows();
    debug_assert_eq!(b.ncols(), n);
    let mut i1 = n;
    while i1 > 0 {
        let i0 = i1.saturating_sub(BLOCK);
        if i1 < n {
            let (mut blk, done) = b.columns_range_pair_mut(i0..i1, i1..n);
            blk.gemm(-1.0, &done, &l.view((i1, i0), (n - i1, i1 - i0)), 1.0);
        }
        backward_block(l, b, i0, i1);
        i1 = i0;
    }
}

fn backward_block(l: &DMatrix<f64>, b: &mut DMatrix<f64>, i0: usize, i1: usize) {
    let g = b.nrows();
    let data = b.as_mut_slice();
    for i in (i0..i1).rev() {
        let (head, tail) = data.split_at_mut((i + 1) * g);
        let target = &mut head[i * g..];
        for j in i + 1..i1 {
            let lji = l[(j, i)];
            if lji != 0.0 {
                let src = &tail[(j - i - 1) * g..(j - i) * g];
                for (t, s) in target.iter_mut().zip(src) {
                    *t -= lji * s;
                }
            }
        }
        let inv = 1.0 / l[(i, i)];
        for t in target.iter_mut() {
            *t *= inv;
        }
    }
}

/// Low-rank factor `F` (n × r) with `A ≈ F Fᵀ`, by greedy diagonal pivoting.
///
/// Stops once the largest residual diagonal falls below
/// `n · ε · max diag(A)`, so for PSD input the factorization is exact to
/// roundoff while exploiting exact low rank (e.g. linear output kernels).
pub fn pivoted_cholesky(a: &DMatrix<f64>) -> DMatrix<f64> {
    let n = a.nrows();
    let mut residual: Vec<f64> = (0..n).map(|i| a[(i, i)]).collect();
    let max_diag = residual.iter().copied().fold(0.0, f64::max);
    let tol = (n.max(1) as f64) * f64::EPSILON * max_diag;
    let mut cols: Vec<Vec<f64>> = Vec::new();
    let mut used = vec![false; n];
    while cols.len() < n {
        let (p, &dp) = match residual
            .iter()
            .enumerate()
            .filter(|(i, _)| !used[*i])
            .max_by(|x, y| x.1.total_cmp(y.1))
        {
            Some(best) => best,
            None => break,
        };
        if dp <= tol || dp <= 0.0 {
            break;
        }
        let pivot = dp.sqrt();
        let mut col: Vec<f64> = (0..n).map(|i| a[(i, p)]).collect();
        for prev in &cols {
            let fp = prev[p];
            if fp != 0.0 {
                for (c, f) in col.iter_mut().zip(prev) {
                    *c -= f * fp;
                }
            }
        }
        for (i, c) in col.iter_mut().enumerate() {
            *c = if used[i] { 0.0 } else { *c / pivot };
        }
        col[p] = pivot;
        used[p] = true;
        for (r, c) in residual.iter_mut().zip(&col) {
            *r -= c * c;
        }
        residual[p] = 0.0;
        cols.push(col);
    }
    let r = cols.len();
    DMatrix::from_fn(n, r, |i, k| cols[k][i])
}

/// Eigenvalues of a symmetric matrix in ascending order.
pub fn symmetric_eigenvalues(a: &DMatrix<f64>) -> Vec<f64> {
    if a.nrows() == 0 {
        return Vec::new();
    }
    let mut v: Vec<f64> = a.clone().symmetric_eigenvalues().iter().copied().collect();
    v.sort_by(f64::total_cmp);
    v
}

/// Haar-distributed orthogonal matrix: QR of a Gaussian matrix with the
/// sign-of-diagonal correction.
pub fn haar_orthogonal<R: Rng + ?Sized>(d: usize, rng: &mut R) -> DMatrix<f64> {
    loop {
        let g = DMatrix::from_fn(d, d, |_, _| rng.sample::<f64, _>(StandardNormal));
        let qr = g.qr();
        let r = qr.r();
        if (0..d).any(|i| r[(i, i)] == 0.0) {
            continue;
        }
        let mut q = qr.q();
        for j in 0..d {
            if r[(j, j)] < 0.0 {
                q.column_mut(j).neg_mut();
            }
        }
        return q;
    }
}

/// Matrix exponential (scaling and squaring with Padé approximants).
pub fn expm(a: &DMatrix<f64>) -> DMatrix<f64> {
    a.exp()
}

/// Principal matrix square root by the Denman–Beavers iteration.
fn sqrtm(a: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    let n = a.nrows();
    let mut y = a.clone();
    let mut z = DMatrix::identity(n, n);
    for _ in 0..100 {
        let y_inv = y
            .clone()
            .try_inverse()
            .ok_or_else(|| Error::numerical("singular iterate in matrix square root"))?;
        let z_inv = z
            .clone()
            .try_inverse()
            .ok_or_else(|| Error::numerical("singular iterate in matrix square root"))?;
        let y_next = (&y + z_inv) * 0.5;
        let z_next = (&z + y_inv) * 0.5;
        let delta = (&y_next - &y).norm();
        y = y_next;
        z = z_next;
        if delta <= 1e-15 * y.norm().max(1.0) {
            break;
        }
    }
    Ok(y)
}

/// Principal matrix logarithm by inverse scaling and squaring.
///
/// Valid for matrices without eigenvalues on the closed negative real axis.
pub fn logm(a: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    let n = a.nrows();
    let id = DMatrix::<f64>::identity(n, n);
    let mut x = a.clone();
    let mut squarings = 0;
    while (&x - &id).norm() > 0.25 {
        if squarings >= 60 {
            return Err(Error::numerical("matrix logarithm did not converge"));
        }
        x = sqrtm(&x)?;
        squarings += 1;
    }
    // log X = 2 atanh(Y) with Y = (X - I)(X + I)⁻¹.
    let denom = (&x + &id)
        .try_inverse()
        .ok_or_else(|| Error::numerical("singular matrix in logarithm series"))?;
    let y = (&x - &id) * denom;
    let y2 = &y * &y;
    let mut term = y.clone();
    let mut sum = y.clone();
    for k in 1..200 {
        term = &term * &y2;
        let add = &term / (2 * k + 1) as f64;
        sum += &add;
        if add.norm() <= 1e-17 * sum.norm().max(1e-300) {
            break;
        }
    }
    Ok(sum * (2.0 * f64::powi(2.0, squarings)))
}

/// Schatten-1 (trace) norm: sum of singular values.
pub fn trace_norm(a: &DMatrix<f64>) -> f64 {
    a.clone().singular_values().iter().sum()
}
