//! Kernel functions and Gram matrices for the displacement field.

use std::fmt;
use std::str::FromStr;

use nalgebra::DMatrix;

use crate::error::{Error, Result};
use crate::points::PointSet;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum KernelFamily {
    /// `exp(-gamma * ||a - b||_1)`
    Laplacian,
    /// `exp(-gamma * ||a - b||_2^2)`
    Gaussian,
}

impl fmt::Display for KernelFamily {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            KernelFamily::Laplacian => f.write_str("laplacian"),
            KernelFamily::Gaussian => f.write_str("gaussian"),
        }
    }
}

impl FromStr for KernelFamily {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "laplacian" | "laplace" => Ok(KernelFamily::Laplacian),
            "gaussian" | "gauss" | "rbf" => Ok(KernelFamily::Gaussian),
            other => Err(Error::InvalidParameter(format!("unknown kernel '{other}'"))),
        }
    }
}

/// Kernel family plus bandwidth `gamma`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KernelSpec {
    family: KernelFamily,
    gamma: f64,
}

impl KernelSpec {
    pub fn new(family: KernelFamily, gamma: f64) -> Result<Self> {
        if !(gamma.is_finite() && gamma > 0.0) {
            return Err(Error::InvalidParameter(format!(
                "kernel bandwidth must be positive, got {gamma}"
            )));
        }
        Ok(Self { family, gamma })
    }

    pub fn laplacian(gamma: f64) -> Result<Self> {
        Self::new(KernelFamily::Laplacian, gamma)
    }

    pub fn gaussian(gamma: f64) -> Result<Self> {
        Self::new(KernelFamily::Gaussian, gamma)
    }

    pub fn family(&self) -> KernelFamily {
        self.family
    }

    pub fn gamma(&self) -> f64 {
        self.gamma
    }

    /// Kernel value for two points of equal dimension.
    pub fn eval(&self, a: &[f64], b: &[f64]) -> Result<f64> {
        if a.len() != b.len() {
            return Err(Error::DimensionMismatch {
                expected: a.len(),
                found: b.len(),
            });
        }
        Ok(self.eval_unchecked(a, b))
    }

    #[inline]
    pub(crate) fn eval_unchecked(&self, a: &[f64], b: &[f64]) -> f64 {
        let dist = match self.family {
            KernelFamily::Laplacian => a.iter().zip(b).map(|(x, y)| (x - y).abs()).sum::<f64>(),
            KernelFamily::Gaussian => a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>(),
        };
        (-self.gamma * dist).exp()
    }

    /// Kernel value as a function of the family's distance (`l1` or squared `l2`).
    pub fn profile(&self, distance: f64) -> f64 {
        (-self.gamma * distance).exp()
    }
}

impl Default for KernelSpec {
    fn default() -> Self {
        Self {
            family: KernelFamily::Laplacian,
            gamma: 2.0,
        }
    }
}

/// Symmetric `P x P` Gram matrix with unit diagonal.
pub fn gram_matrix(spec: &KernelSpec, pts: &PointSet) -> DMatrix<f64> {
    let n = pts.len();
    let mut g = DMatrix::from_element(n, n, 1.0);
    for j in 0..n {
        let pj = pts.point(j);
        for i in 0..j {
            let v = spec.eval_unchecked(pts.point(i), pj);
            g[(i, j)] = v;
            g[(j, i)] = v;
        }
    }
    g
}

/// `R x S` matrix with entry `(i, j) = K(rows_i, cols_j)`.
pub fn cross_gram(spec: &KernelSpec, rows: &PointSet, cols: &PointSet) -> Result<DMatrix<f64>> {
    rows.check_same_dim(cols)?;
    Ok(DMatrix::from_fn(rows.len(), cols.len(), |i, j| {
        spec.eval_unchecked(rows.point(i), cols.point(j))
    }))
}
