//! Point sets and shape normalization.
//!
//! A [`PointSet`] stores `P` points of dimension `n` in row-major order. The
//! same type plays the target `X`, the source `Y` and the deformed source `T`.

use nalgebra::DMatrix;

use crate::error::{Error, Result};

/// Centering and isotropic scaling applied by [`normalize`].
#[derive(Debug, Clone, PartialEq)]
pub struct NormalizationTransform {
    centroid: Vec<f64>,
    scale: f64,
}

impl NormalizationTransform {
    pub fn new(centroid: Vec<f64>, scale: f64) -> Result<Self> {
        if !(scale.is_finite() && scale > 0.0) {
            return Err(Error::InvalidParameter(format!(
                "normalization scale must be positive and finite, got {scale}"
            )));
        }
        if centroid.is_empty() || centroid.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidParameter(
                "normalization centroid must be a finite, non-empty vector".into(),
            ));
        }
        Ok(Self { centroid, scale })
    }

    pub fn centroid(&self) -> &[f64] {
        &self.centroid
    }

    pub fn scale(&self) -> f64 {
        self.scale
    }

    pub fn dim(&self) -> usize {
        self.centroid.len()
    }

    /// Maps an original-frame coordinate into the normalized frame.
    pub fn forward(&self, p: &[f64]) -> Vec<f64> {
        p.iter()
            .zip(&self.centroid)
            .map(|(v, c)| (v - c) / self.scale)
            .collect()
    }

    /// Maps a normalized-frame coordinate back into the original frame.
    pub fn inverse(&self, p: &[f64]) -> Vec<f64> {
        p.iter()
            .zip(&self.centroid)
            .map(|(v, c)| v * self.scale + c)
            .collect()
    }
}

/// An ordered list of `n`-dimensional points.
#[derive(Debug, Clone, PartialEq)]
pub struct PointSet {
    dim: usize,
    coords: Vec<f64>,
    norm: Option<NormalizationTransform>,
}

impl PointSet {
    /// Builds a point set from row-major coordinates.
    pub fn new(dim: usize, coords: Vec<f64>) -> Result<Self> {
        if dim == 0 {
            return Err(Error::InvalidParameter("point dimension must be >= 1".into()));
        }
        if coords.is_empty() {
            return Err(Error::DegenerateInput("point set is empty".into()));
        }
        if !coords.len().is_multiple_of(dim) {
            return Err(Error::InvalidParameter(format!(
                "{} coordinates do not split into points of dimension {dim}",
                coords.len()
            )));
        }
        if let Some(pos) = coords.iter().position(|v| !v.is_finite()) {
            return Err(Error::InvalidParameter(format!(
                "non-finite coordinate in point {}",
                pos / dim
            )));
        }
        Ok(Self {
            dim,
            coords,
            norm: None,
        })
    }

    pub fn from_rows<R: AsRef<[f64]>>(rows: &[R]) -> Result<Self> {
        let first = rows
            .first()
            .ok_or_else(|| Error::DegenerateInput("point set is empty".into()))?;
        let dim = first.as_ref().len();
        let mut coords = Vec::with_capacity(rows.len() * dim);
        for row in rows {
            let row = row.as_ref();
            if row.len() != dim {
                return Err(Error::DimensionMismatch {
                    expected: dim,
                    found: row.len(),
                });
            }
            coords.extend_from_slice(row);
        }
        Self::new(dim, coords)
    }

    /// Builds a point set from a `P x n` matrix (one point per row).
    pub fn from_matrix(m: &DMatrix<f64>) -> Result<Self> {
        let (rows, cols) = m.shape();
        let mut coords = Vec::with_capacity(rows * cols);
        for i in 0..rows {
            coords.extend(m.row(i).iter().copied());
        }
        Self::new(cols, coords)
    }

    pub fn len(&self) -> usize {
        self.coords.len() / self.dim
    }

    pub fn is_empty(&self) -> bool {
        self.coords.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn point(&self, i: usize) -> &[f64] {
        &self.coords[i * self.dim..(i + 1) * self.dim]
    }

    pub fn iter(&self) -> std::slice::ChunksExact<'_, f64> {
        self.coords.chunks_exact(self.dim)
    }

    /// Row-major coordinate buffer.
    pub fn as_slice(&self) -> &[f64] {
        &self.coords
    }

    pub fn into_coords(self) -> Vec<f64> {
        self.coords
    }

    /// `P x n` matrix copy, one point per row.
    pub fn to_matrix(&self) -> DMatrix<f64> {
        DMatrix::from_row_slice(self.len(), self.dim, &self.coords)
    }

    pub fn norm(&self) -> Option<&NormalizationTransform> {
        self.norm.as_ref()
    }

    pub fn with_norm(mut self, norm: Option<NormalizationTransform>) -> Self {
        self.norm = norm;
        self
    }

    /// Mean of all points.
    pub fn centroid(&self) -> Vec<f64> {
        let mut c = vec![0.0; self.dim];
        for p in self.iter() {
            for (acc, v) in c.iter_mut().zip(p) {
                *acc += v;
            }
        }
        let inv = 1.0 / self.len() as f64;
        c.iter_mut().for_each(|v| *v *= inv);
        c
    }

    /// Points at the given indices, in the given order.
    pub fn select(&self, indices: &[usize]) -> Result<Self> {
        let mut coords = Vec::with_capacity(indices.len() * self.dim);
        for &i in indices {
            if i >= self.len() {
                return Err(Error::InvalidParameter(format!(
                    "index {i} out of range for {} points",
                    self.len()
                )));
            }
            coords.extend_from_slice(self.point(i));
        }
        Self::new(self.dim, coords)
    }

    pub(crate) fn check_same_dim(&self, other: &PointSet) -> Result<()> {
        if self.dim != other.dim {
            return Err(Error::DimensionMismatch {
                expected: self.dim,
                found: other.dim,
            });
        }
        Ok(())
    }
}

/// Centers `ps` at the origin and divides by its RMS radius.
///
/// One scale is shared by all axes so the aspect ratio is preserved. The
/// transform is recorded on the returned set.
pub fn normalize(ps: &PointSet) -> Result<PointSet> {
    let centroid = ps.centroid();
    let sq: f64 = ps
        .iter()
        .map(|p| p.iter().zip(&centroid).map(|(v, c)| (v - c).powi(2)).sum::<f64>())
        .sum();
    let scale = (sq / ps.len() as f64).sqrt();
    if !(scale > 0.0) || !scale.is_finite() {
        return Err(Error::DegenerateInput(
            "all points coincide; cannot normalize".into(),
        ));
    }
    let inv = 1.0 / scale;
    let coords = ps
        .iter()
        .flat_map(|p| p.iter().zip(&centroid).map(move |(v, c)| (v - c) * inv))
        .collect();
    let t = NormalizationTransform::new(centroid, scale)?;
    Ok(PointSet::new(ps.dim(), coords)?.with_norm(Some(t)))
}

/// Maps every point `p` to `p * scale + centroid`.
pub fn denormalize(ps: &PointSet, t: &NormalizationTransform) -> Result<PointSet> {
    if ps.dim() != t.dim() {
        return Err(Error::DimensionMismatch {
            expected: t.dim(),
            found: ps.dim(),
        });
    }
    let coords = ps.iter().flat_map(|p| t.inverse(p)).collect();
    PointSet::new(ps.dim(), coords)
}
