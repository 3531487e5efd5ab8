//! Clustering-improved Nyström approximation of the kernel Gram matrix.
//!
//! Landmarks are k-means centroids of the source set. With `E = K(Y, Z)` and
//! `W = K(Z, Z)` the Gram matrix is approximated by `L ~ E W^-1 E^T = G G^T`,
//! where `G = E R^-T` and `R R^T` is the Cholesky factor of the jittered `W`.
//! The regularized system `(L + D) c = B` is solved with the matrix inversion
//! identity
//!
//! ```text
//! (D + G G^T)^-1 = D^-1 - D^-1 G (I + G^T D^-1 G)^-1 G^T D^-1
//! ```
//!
//! so a solve costs `O(C C'^2 + C'^3)` time and `O(C C')` memory.

use nalgebra::{Cholesky, DMatrix, SymmetricEigen};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::kernel::{cross_gram, gram_matrix, KernelFamily, KernelSpec};
use crate::kmeans::{kmeans_elkan, KMeansResult, DEFAULT_MAX_ITERS};
use crate::points::PointSet;

/// Largest source size for which a dense `C x C` Gram matrix is materialized
/// by audits.
pub const DENSE_AUDIT_LIMIT: usize = 2000;

/// Relative diagonal jitter: `delta = JITTER_SCALE * trace(W) / C'`.
pub const JITTER_SCALE: f64 = 1e-8;

/// `C' = max(1, round(ratio * C))`.
pub fn landmark_count(points: usize, ratio: f64) -> Result<usize> {
    if !(ratio > 0.0 && ratio <= 1.0) {
        return Err(Error::InvalidParameter(format!(
            "approximation ratio must lie in (0, 1], got {ratio}"
        )));
    }
    Ok(((ratio * points as f64).round() as usize).clamp(1, points))
}

/// Low-rank factors `E` (`C x C'`) and `W` (`C' x C'`).
#[derive(Debug, Clone)]
pub struct NystromFactor {
    e: DMatrix<f64>,
    w: DMatrix<f64>,
    landmarks: PointSet,
    jitter: f64,
    /// `G = E R^-T` with `W + delta I = R R^T`, so the surrogate is `G G^T`.
    g: DMatrix<f64>,
    clustering: Option<KMeansResult>,
}

impl NystromFactor {
    /// Builds the factor for arbitrary landmark points.
    pub fn from_landmarks(spec: &KernelSpec, source: &PointSet, landmarks: PointSet) -> Result<Self> {
        let e = cross_gram(spec, source, &landmarks)?;
        let w = gram_matrix(spec, &landmarks);
        let k = landmarks.len();
        let jitter = JITTER_SCALE * w.trace() / k as f64;
        let mut wj = w.clone();
        for i in 0..k {
            wj[(i, i)] += jitter;
        }
        let w_chol = Cholesky::new(wj).ok_or_else(|| {
            Error::SingularSystem("landmark kernel matrix is not positive definite".into())
        })?;
        let g_t = w_chol
            .l_dirty()
            .solve_lower_triangular(&e.transpose())
            .ok_or_else(|| Error::SingularSystem("landmark Cholesky factor is singular".into()))?;
        Ok(Self {
            e,
            w,
            landmarks,
            jitter,
            g: g_t.transpose(),
            clustering: None,
        })
    }

    pub fn e(&self) -> &DMatrix<f64> {
        &self.e
    }

    /// Landmark Gram matrix without jitter.
    pub fn w(&self) -> &DMatrix<f64> {
        &self.w
    }

    pub fn landmarks(&self) -> &PointSet {
        &self.landmarks
    }

    pub fn jitter(&self) -> f64 {
        self.jitter
    }

    /// The k-means run that produced the landmarks, if they were clustered.
    pub fn clustering(&self) -> Option<&KMeansResult> {
        self.clustering.as_ref()
    }

    /// Number of source points `C`.
    pub fn rows(&self) -> usize {
        self.e.nrows()
    }

    /// Number of landmarks `C'`.
    pub fn rank(&self) -> usize {
        self.e.ncols()
    }

    /// `E (W + delta I)^-1 E^T x` without forming the `C x C` product.
    pub fn apply(&self, x: &DMatrix<f64>) -> DMatrix<f64> {
        &self.g * self.g.tr_mul(x)
    }

    /// Dense `E (W + delta I)^-1 E^T`. Audit scale only.
    pub fn approximation(&self) -> DMatrix<f64> {
        &self.g * self.g.transpose()
    }
}

/// Nyström factor with Elkan k-means centroids of `source` as landmarks.
pub fn build_nystrom(spec: &KernelSpec, source: &PointSet, ratio: f64, seed: u64) -> Result<NystromFactor> {
    let k = landmark_count(source.len(), ratio)?;
    let clustering = kmeans_elkan(source, k, seed, DEFAULT_MAX_ITERS)?;
    let mut factor = NystromFactor::from_landmarks(spec, source, clustering.centroids.clone())?;
    factor.clustering = Some(clustering);
    Ok(factor)
}

/// Baseline factor with landmarks drawn uniformly without replacement from
/// `source`.
pub fn build_nystrom_random(
    spec: &KernelSpec,
    source: &PointSet,
    ratio: f64,
    seed: u64,
) -> Result<NystromFactor> {
    let k = landmark_count(source.len(), ratio)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut idx = rand::seq::index::sample(&mut rng, source.len(), k).into_vec();
    idx.sort_unstable();
    let landmarks = source.select(&idx)?;
    NystromFactor::from_landmarks(spec, source, landmarks)
}

/// Either the exact Gram matrix or its low-rank surrogate.
#[derive(Debug, Clone)]
pub enum GramOperator {
    Dense(DMatrix<f64>),
    LowRank(NystromFactor),
}

impl GramOperator {
    pub fn size(&self) -> usize {
        match self {
            GramOperator::Dense(l) => l.nrows(),
            GramOperator::LowRank(f) => f.rows(),
        }
    }

    /// `L x`.
    pub fn apply(&self, x: &DMatrix<f64>) -> DMatrix<f64> {
        match self {
            GramOperator::Dense(l) => l * x,
            GramOperator::LowRank(f) => f.apply(x),
        }
    }
}

/// Solves `(L + diag(d)) c = b` for a `C x n` right-hand side.
pub fn regularized_solve(op: &GramOperator, d: &[f64], b: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    let c = op.size();
    if d.len() != c || b.nrows() != c {
        return Err(Error::DimensionMismatch {
            expected: c,
            found: if d.len() != c { d.len() } else { b.nrows() },
        });
    }
    if let Some(bad) = d.iter().find(|v| !(v.is_finite() && **v > 0.0)) {
        return Err(Error::InvalidParameter(format!(
            "regularization diagonal must be positive, found {bad}"
        )));
    }
    match op {
        GramOperator::Dense(l) => {
            let mut a = l.clone();
            for (i, di) in d.iter().enumerate() {
                a[(i, i)] += di;
            }
            let chol = Cholesky::new(a)
                .ok_or_else(|| Error::SingularSystem("L + diag(d) is not positive definite".into()))?;
            Ok(chol.solve(b))
        }
        GramOperator::LowRank(f) => {
            let d_inv: Vec<f64> = d.iter().map(|v| 1.0 / v).collect();
            let mut scaled_b = b.clone();
            for (mut row, s) in scaled_b.row_iter_mut().zip(&d_inv) {
                row *= *s;
            }
            // Woodbury on G G^T + D: inner = I + H^T H with H = D^-1/2 G, whose
            // eigenvalues are all >= 1 even when W is nearly singular.
            let mut h = f.g.clone();
            for (mut row, s) in h.row_iter_mut().zip(&d_inv) {
                row *= s.sqrt();
            }
            let h_t = h.transpose();
            let mut inner = &h_t * &h;
            for i in 0..f.rank() {
                inner[(i, i)] += 1.0;
            }
            let chol = Cholesky::new(inner).ok_or_else(|| {
                Error::SingularSystem("inner landmark system is not positive definite".into())
            })?;
            let y = chol.solve(&f.g.tr_mul(&scaled_b));
            let mut correction = &f.g * y;
            for (mut row, s) in correction.row_iter_mut().zip(&d_inv) {
                row *= *s;
            }
            Ok(scaled_b - correction)
        }
    }
}

/// Eigen-based pseudo-inverse of a symmetric positive semidefinite matrix.
#[derive(Debug, Clone)]
pub struct SymmetricPseudoInverse {
    vectors: DMatrix<f64>,
    inv_eigenvalues: Vec<f64>,
    ill_conditioned: bool,
}

impl SymmetricPseudoInverse {
    /// Eigenvalues below `max_eig * size * eps` are treated as zero.
    pub fn new(m: &DMatrix<f64>) -> Self {
        let eig = SymmetricEigen::new(m.clone());
        let max = eig.eigenvalues.iter().fold(0.0f64, |a, &b| a.max(b));
        let tol = max * m.nrows() as f64 * f64::EPSILON;
        let mut ill_conditioned = false;
        let inv_eigenvalues = eig
            .eigenvalues
            .iter()
            .map(|&l| {
                if l > tol {
                    1.0 / l
                } else {
                    ill_conditioned = true;
                    0.0
                }
            })
            .collect();
        Self {
            vectors: eig.eigenvectors,
            inv_eigenvalues,
            ill_conditioned,
        }
    }

    pub fn frobenius_norm(&self) -> f64 {
        self.inv_eigenvalues.iter().map(|v| v * v).sum::<f64>().sqrt()
    }

    /// True when some eigenvalue fell below the cutoff.
    pub fn ill_conditioned(&self) -> bool {
        self.ill_conditioned
    }

    /// `E W^+ E^T` computed as `G G^T` with `G = E V diag(lambda^-1/2)`.
    pub fn sandwich(&self, e: &DMatrix<f64>) -> DMatrix<f64> {
        let mut g = e * &self.vectors;
        for (mut col, inv) in g.column_iter_mut().zip(&self.inv_eigenvalues) {
            col *= inv.sqrt();
        }
        &g * g.transpose()
    }
}

/// `||L - E W^+ E^T||_F` with the exact (pseudo-)inverse of the un-jittered `W`.
pub fn approximation_error(spec: &KernelSpec, source: &PointSet, factor: &NystromFactor) -> Result<f64> {
    if source.len() > DENSE_AUDIT_LIMIT {
        return Err(Error::InvalidParameter(format!(
            "dense audit limited to {DENSE_AUDIT_LIMIT} points, got {}",
            source.len()
        )));
    }
    let l = gram_matrix(spec, source);
    let pinv = SymmetricPseudoInverse::new(factor.w());
    Ok((l - pinv.sandwich(factor.e())).norm())
}

/// Exact approximation error next to the clustering-based upper bound
/// `4 sqrt(2) T^{3/2} gamma sqrt(C' q) + 2 C' gamma^2 T q ||W^-1||_F`.
#[derive(Debug, Clone, PartialEq)]
pub struct BoundReport {
    pub epsilon: f64,
    pub bound: f64,
    /// `bound - epsilon`.
    pub slack: f64,
    pub landmarks: usize,
    pub max_cluster_size: usize,
    pub quantization_error: f64,
    pub w_inv_frobenius: f64,
    /// `W` was numerically singular and a pseudo-inverse was used.
    pub ill_conditioned: bool,
}

impl BoundReport {
    pub fn holds(&self) -> bool {
        self.slack >= 0.0
    }
}

/// Right-hand side of the Laplacian-kernel error bound.
pub fn error_bound(
    gamma: f64,
    landmarks: usize,
    max_cluster_size: usize,
    quantization_error: f64,
    w_inv_frobenius: f64,
) -> f64 {
    let t = max_cluster_size as f64;
    let cp = landmarks as f64;
    let q = quantization_error;
    4.0 * 2f64.sqrt() * t.powf(1.5) * gamma * (cp * q).sqrt()
        + 2.0 * cp * gamma * gamma * t * q * w_inv_frobenius
}

/// Builds a clustered factor and compares its exact error with the bound.
/// Laplacian kernel only.
pub fn audit_bound(spec: &KernelSpec, source: &PointSet, ratio: f64, seed: u64) -> Result<BoundReport> {
    if spec.family() != KernelFamily::Laplacian {
        return Err(Error::UnsupportedKernel(spec.family().to_string()));
    }
    let factor = build_nystrom(spec, source, ratio, seed)?;
    audit_factor(spec, source, &factor)
}

/// Bound audit for an already built clustered factor.
pub fn audit_factor(spec: &KernelSpec, source: &PointSet, factor: &NystromFactor) -> Result<BoundReport> {
    if spec.family() != KernelFamily::Laplacian {
        return Err(Error::UnsupportedKernel(spec.family().to_string()));
    }
    let clustering = factor.clustering().ok_or_else(|| {
        Error::InvalidParameter("bound audit requires clustered landmarks".into())
    })?;
    if source.len() > DENSE_AUDIT_LIMIT {
        return Err(Error::InvalidParameter(format!(
            "dense audit limited to {DENSE_AUDIT_LIMIT} points, got {}",
            source.len()
        )));
    }
    let pinv = SymmetricPseudoInverse::new(factor.w());
    let l = gram_matrix(spec, source);
    let epsilon = (l - pinv.sandwich(factor.e())).norm();
    let w_inv_frobenius = pinv.frobenius_norm();
    let bound = error_bound(
        spec.gamma(),
        factor.rank(),
        clustering.max_cluster_size,
        clustering.quantization_error,
        w_inv_frobenius,
    );
    Ok(BoundReport {
        epsilon,
        bound,
        slack: bound - epsilon,
        landmarks: factor.rank(),
        max_cluster_size: clustering.max_cluster_size,
        quantization_error: clustering.quantization_error,
        w_inv_frobenius,
        ill_conditioned: pinv.ill_conditioned(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};

    fn random_set(n: usize, dim: usize, seed: u64) -> PointSet {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        PointSet::new(dim, (0..n * dim).map(|_| rng.random::<f64>()).collect()).unwrap()
    }

    fn rel_diff(a: &DMatrix<f64>, b: &DMatrix<f64>) -> f64 {
        (a - b).norm() / b.norm().max(f64::MIN_POSITIVE)
    }

    #[test]
    fn landmark_rounding() {
        assert_eq!(landmark_count(100, 0.3).unwrap(), 30);
        assert_eq!(landmark_count(10, 0.01).unwrap(), 1);
        assert_eq!(landmark_count(7, 1.0).unwrap(), 7);
        assert_eq!(landmark_count(5, 0.5).unwrap(), 3);
        assert!(landmark_count(10, 0.0).is_err());
        assert!(landmark_count(10, 1.5).is_err());
    }

    #[test]
    fn full_ratio_reproduces_gram() {
        let spec = KernelSpec::laplacian(2.0).unwrap();
        let pts = random_set(60, 2, 1);
        let f = build_nystrom(&spec, &pts, 1.0, 0).unwrap();
        assert_eq!(f.clustering().unwrap().quantization_error, 0.0);
        let l = gram_matrix(&spec, &pts);
        assert!(rel_diff(&f.approximation(), &l) < 1e-6);
        assert!(approximation_error(&spec, &pts, &f).unwrap() / l.norm() < 1e-6);
    }

    #[test]
    fn factor_invariants() {
        let spec = KernelSpec::laplacian(2.0).unwrap();
        let pts = random_set(80, 3, 2);
        let f = build_nystrom(&spec, &pts, 0.2, 3).unwrap();
        assert_eq!(f.rank(), 16);
        assert_eq!(f.w(), &f.w().transpose());
        assert!((0..16).all(|i| f.w()[(i, i)] == 1.0));
        assert!(f.e().iter().all(|&v| v > 0.0 && v <= 1.0));
        let approx = f.approximation();
        assert!(rel_diff(&approx, &approx.transpose()) < 1e-12);
        let eig = SymmetricEigen::new((&approx + approx.transpose()) * 0.5);
        assert!(eig.eigenvalues.min() > -1e-8);
        assert!((f.jitter() - 1e-8).abs() < 1e-20);
    }

    #[test]
    fn single_landmark_on_coincident_points() {
        let spec = KernelSpec::laplacian(2.0).unwrap();
        let pts = PointSet::from_rows(&vec![[0.5, -0.5]; 12]).unwrap();
        let f = build_nystrom(&spec, &pts, 0.05, 0).unwrap();
        assert_eq!(f.rank(), 1);
        assert!(f.e().iter().all(|&v| v == 1.0));
        assert_eq!(f.w()[(0, 0)], 1.0);
        assert!(approximation_error(&spec, &pts, &f).unwrap() < 1e-12);
    }

    #[test]
    fn solve_with_zero_rhs_is_zero() {
        let spec = KernelSpec::laplacian(2.0).unwrap();
        let pts = random_set(30, 2, 4);
        let b = DMatrix::zeros(30, 2);
        let d = vec![0.3; 30];
        for op in [
            GramOperator::Dense(gram_matrix(&spec, &pts)),
            GramOperator::LowRank(build_nystrom(&spec, &pts, 0.3, 0).unwrap()),
        ] {
            let c = regularized_solve(&op, &d, &b).unwrap();
            assert!(c.iter().all(|&v| v == 0.0));
        }
    }

    #[test]
    fn near_identity_gram_halves_rhs() {
        // Very large gamma: L ~ I, so (I + I) c = B.
        let spec = KernelSpec::laplacian(1e4).unwrap();
        let pts = random_set(20, 2, 5);
        let b = DMatrix::from_fn(20, 2, |i, j| (i as f64) - 3.0 * j as f64);
        let c = regularized_solve(&GramOperator::Dense(gram_matrix(&spec, &pts)), &[1.0; 20], &b).unwrap();
        assert!(rel_diff(&c, &(&b * 0.5)) < 1e-10);
    }

    #[test]
    fn low_rank_matches_dense_when_exact() {
        let spec = KernelSpec::laplacian(2.0).unwrap();
        let pts = random_set(40, 2, 6);
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let b = DMatrix::from_fn(40, 2, |_, _| rng.random::<f64>() - 0.5);
        let d: Vec<f64> = (0..40).map(|_| 0.01 + rng.random::<f64>() * 0.1).collect();
        let dense = regularized_solve(&GramOperator::Dense(gram_matrix(&spec, &pts)), &d, &b).unwrap();
        let factor = NystromFactor::from_landmarks(&spec, &pts, pts.clone()).unwrap();
        let low = regularized_solve(&GramOperator::LowRank(factor), &d, &b).unwrap();
        assert!(rel_diff(&low, &dense) < 1e-6);
    }

    #[test]
    fn low_rank_solve_satisfies_its_own_system() {
        let spec = KernelSpec::laplacian(2.0).unwrap();
        let pts = random_set(90, 3, 8);
        let factor = build_nystrom(&spec, &pts, 0.2, 1).unwrap();
        let approx = factor.approximation();
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let b = DMatrix::from_fn(90, 3, |_, _| rng.random::<f64>());
        let d: Vec<f64> = (0..90).map(|_| 0.05 + rng.random::<f64>()).collect();
        let c = regularized_solve(&GramOperator::LowRank(factor), &d, &b).unwrap();
        let mut a = approx;
        for i in 0..90 {
            a[(i, i)] += d[i];
        }
        assert!(rel_diff(&(a * c), &b) < 1e-8);
    }

    #[test]
    fn solve_rejects_bad_inputs() {
        let op = GramOperator::Dense(DMatrix::identity(3, 3));
        let b = DMatrix::zeros(3, 1);
        assert!(regularized_solve(&op, &[1.0, 1.0], &b).is_err());
        assert!(regularized_solve(&op, &[1.0, 0.0, 1.0], &b).is_err());
    }

    #[test]
    fn bound_on_coincident_points_is_zero() {
        let spec = KernelSpec::laplacian(2.0).unwrap();
        let pts = PointSet::from_rows(&vec![[1.0, 1.0]; 20]).unwrap();
        let r = audit_bound(&spec, &pts, 0.2, 0).unwrap();
        assert_eq!(r.quantization_error, 0.0);
        assert_eq!(r.bound, 0.0);
        assert!(r.epsilon < 1e-10);
    }

    #[test]
    fn bound_with_full_ratio() {
        let spec = KernelSpec::laplacian(2.0).unwrap();
        let pts = random_set(50, 2, 10);
        let r = audit_bound(&spec, &pts, 1.0, 0).unwrap();
        assert!(r.epsilon <= 1e-6);
        assert!(r.bound.abs() < 1e-12);
    }

    #[test]
    fn bound_holds_on_uniform_square() {
        let spec = KernelSpec::laplacian(2.0).unwrap();
        for seed in 0..10 {
            let pts = random_set(200, 2, 1000 + seed);
            let r = audit_bound(&spec, &pts, 0.15, seed).unwrap();
            assert!(r.holds(), "seed {seed}: {r:?}");
        }
    }

    #[test]
    fn audit_rejects_gaussian() {
        let spec = KernelSpec::gaussian(2.0).unwrap();
        let pts = random_set(10, 2, 0);
        assert!(matches!(
            audit_bound(&spec, &pts, 0.5, 0),
            Err(Error::UnsupportedKernel(_))
        ));
    }

    #[test]
    fn clustered_landmarks_beat_random_on_median() {
        let spec = KernelSpec::laplacian(2.0).unwrap();
        let pts = random_set(300, 2, 77);
        let mut clustered = Vec::new();
        let mut random = Vec::new();
        for seed in 0..20 {
            let fc = build_nystrom(&spec, &pts, 0.1, seed).unwrap();
            let fr = build_nystrom_random(&spec, &pts, 0.1, seed).unwrap();
            clustered.push(approximation_error(&spec, &pts, &fc).unwrap());
            random.push(approximation_error(&spec, &pts, &fr).unwrap());
        }
        let median = |v: &mut Vec<f64>| {
            v.sort_by(|a, b| a.total_cmp(b));
            0.5 * (v[9] + v[10])
        };
        assert!(median(&mut clustered) < median(&mut random));
    }
}
