use crate::error::{Error, Result};

/// A list of dense points in ℝ^dim, stored row-major.
///
/// An empty list is dimension-agnostic: it is compatible with any other list.
#[derive(Clone, Debug, PartialEq, Default)]
pub struct Points {
    dim: usize,
    data: Vec<f64>,
}

impl Points {
    pub fn new(dim: usize, data: Vec<f64>) -> Result<Self> {
        if dim == 0 && !data.is_empty() {
            return Err(Error::input("points of dimension 0 cannot carry coordinates"));
        }
        if dim > 0 && !data.len().is_multiple_of(dim) {
            return Err(Error::input(format!(
                "{} coordinates do not split into points of dimension {dim}",
                data.len()
            )));
        }
        Ok(Self { dim, data })
    }

    pub fn empty(dim: usize) -> Self {
        Self { dim, data: Vec::new() }
    }

    pub fn from_rows<R: AsRef<[f64]>>(rows: &[R]) -> Result<Self> {
        let dim = rows.first().map_or(0, |r| r.as_ref().len());
        let mut data = Vec::with_capacity(dim * rows.len());
        for (i, row) in rows.iter().enumerate() {
            let row = row.as_ref();
            if row.len() != dim {
                return Err(Error::input(format!(
                    "point {i} has dimension {}, expected {dim}",
                    row.len()
                )));
            }
            data.extend_from_slice(row);
        }
        Self::new(dim, data)
    }

    /// Scalar points (dimension 1).
    pub fn from_scalars(values: &[f64]) -> Self {
        Self { dim: 1, data: values.to_vec() }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        if self.dim == 0 {
            0
        } else {
            self.data.len() / self.dim
        }
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn point(&self, i: usize) -> &[f64] {
        &self.data[i * self.dim..(i + 1) * self.dim]
    }

    pub fn iter(&self) -> impl ExactSizeIterator<Item = &[f64]> + '_ {
        (0..self.len()).map(move |i| self.point(i))
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    pub fn push(&mut self, p: &[f64]) -> Result<()> {
        if self.is_empty() && self.dim != p.len() {
            self.dim = p.len();
        }
        if p.len() != self.dim {
            return Err(Error::input(format!(
                "point has dimension {}, expected {}",
                p.len(),
                self.dim
            )));
        }
        self.data.extend_from_slice(p);
        Ok(())
    }

    pub fn select(&self, indices: &[usize]) -> Points {
        let mut data = Vec::with_capacity(indices.len() * self.dim);
        for &i in indices {
            data.extend_from_slice(self.point(i));
        }
        Points { dim: self.dim, data }
    }

    /// Concatenation; fails on dimension mismatch between non-empty lists.
    pub fn concat(&self, other: &Points) -> Result<Points> {
        check_compatible(self, other)?;
        if self.is_empty() {
            return Ok(other.clone());
        }
        let mut data = self.data.clone();
        data.extend_from_slice(&other.data);
        Ok(Points { dim: self.dim, data })
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|v| v.is_finite())
    }

    pub fn to_rows(&self) -> Vec<Vec<f64>> {
        self.iter().map(<[f64]>::to_vec).collect()
    }
}

pub(crate) fn check_compatible(a: &Points, b: &Points) -> Result<()> {
    if !a.is_empty() && !b.is_empty() && a.dim() != b.dim() {
        return Err(Error::input(format!(
            "dimension mismatch: {} vs {}",
            a.dim(),
            b.dim()
        )));
    }
    Ok(())
}

pub(crate) fn check_point(points: &Points, x: &[f64]) -> Result<()> {
    if !points.is_empty() && points.dim() != x.len() {
        return Err(Error::input(format!(
            "query has dimension {}, expected {}",
            x.len(),
            points.dim()
        )));
    }
    Ok(())
}
