//! The registration loop.
//!
//! Source points act as cluster centroids and target points as members. Each
//! iteration applies closed-form updates in this order: fuzzy memberships
//! `U`, cluster weights `alpha`, kernel coefficients `c` (which move the
//! centroids to `T = Y + L c`), and finally the shared isotropic variance
//! `sigma^2`.

use std::time::Instant;

use nalgebra::DMatrix;

use crate::config::{RegistrationConfig, SIGMA2_FLOOR};
use crate::error::{Error, Result};
use crate::kernel::gram_matrix;
use crate::nystrom::{build_nystrom, regularized_solve, GramOperator};
use crate::points::{denormalize, normalize, PointSet};

/// Column sums below this are treated as centroids that attract no mass.
pub const DEGENERATE_COLUMN_MASS: f64 = 1e-12;
/// Regularization assigned to degenerate columns.
pub const MAX_REGULARIZATION: f64 = 1e12;

/// Row-stochastic `M x C` fuzzy membership matrix, stored row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct MembershipMatrix {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl MembershipMatrix {
    pub fn from_row_major(rows: usize, cols: usize, data: Vec<f64>) -> Result<Self> {
        if rows == 0 || cols == 0 || data.len() != rows * cols {
            return Err(Error::InvalidParameter(format!(
                "membership buffer of length {} does not match {rows}x{cols}",
                data.len()
            )));
        }
        if data.iter().any(|v| !(0.0..=1.0).contains(v)) {
            return Err(Error::InvalidParameter(
                "membership degrees must lie in [0, 1]".into(),
            ));
        }
        Ok(Self { rows, cols, data })
    }

    /// Every entry `1 / C`.
    pub fn uniform(rows: usize, cols: usize) -> Self {
        Self {
            rows,
            cols,
            data: vec![1.0 / cols as f64; rows * cols],
        }
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.data[i * self.cols + j]
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn to_matrix(&self) -> DMatrix<f64> {
        DMatrix::from_row_slice(self.rows, self.cols, &self.data)
    }

    pub fn row_sums(&self) -> Vec<f64> {
        self.data.chunks_exact(self.cols).map(|r| r.iter().sum()).collect()
    }

    /// `U^T 1_M`.
    pub fn column_sums(&self) -> Vec<f64> {
        let mut s = vec![0.0; self.cols];
        for row in self.data.chunks_exact(self.cols) {
            for (acc, u) in s.iter_mut().zip(row) {
                *acc += u;
            }
        }
        s
    }

    /// Shannon entropy of row `i` (natural log).
    pub fn row_entropy(&self, i: usize) -> f64 {
        -self
            .row(i)
            .iter()
            .filter(|&&u| u > 0.0)
            .map(|u| u * u.ln())
            .sum::<f64>()
    }

    /// `U^T X` as a `C x n` matrix.
    pub fn weighted_sum(&self, x: &PointSet) -> Result<DMatrix<f64>> {
        if x.len() != self.rows {
            return Err(Error::DimensionMismatch {
                expected: self.rows,
                found: x.len(),
            });
        }
        Ok(self.moments(x).weighted)
    }

    fn moments(&self, x: &PointSet) -> Moments {
        let n = x.dim();
        let mut column_sums = vec![0.0; self.cols];
        let mut weighted = vec![0.0; self.cols * n];
        let mut target_energy = 0.0;
        for (row, p) in self.data.chunks_exact(self.cols).zip(x.iter()) {
            let mut row_sum = 0.0;
            for (j, &u) in row.iter().enumerate() {
                if u == 0.0 {
                    continue;
                }
                row_sum += u;
                column_sums[j] += u;
                for (acc, v) in weighted[j * n..(j + 1) * n].iter_mut().zip(p) {
                    *acc += u * v;
                }
            }
            target_energy += row_sum * p.iter().map(|v| v * v).sum::<f64>();
        }
        Moments {
            column_sums,
            weighted: DMatrix::from_row_slice(self.cols, n, &weighted),
            target_energy,
        }
    }
}

/// Sufficient statistics of `U` against the targets.
struct Moments {
    /// `s = U^T 1_M`
    column_sums: Vec<f64>,
    /// `U^T X`
    weighted: DMatrix<f64>,
    /// `tr(X^T diag(U 1_C) X)`
    target_energy: f64,
}

#[inline]
fn sq_dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

fn check_membership_inputs(
    x: &PointSet,
    t: &PointSet,
    sigma2: f64,
    alpha: &[f64],
    lambda: f64,
) -> Result<()> {
    x.check_same_dim(t)?;
    if alpha.len() != t.len() {
        return Err(Error::DimensionMismatch {
            expected: t.len(),
            found: alpha.len(),
        });
    }
    if !(sigma2 > 0.0 && sigma2.is_finite()) {
        return Err(Error::InvalidParameter(format!("sigma2 must be positive, got {sigma2}")));
    }
    if !(lambda > 0.0 && lambda.is_finite()) {
        return Err(Error::InvalidParameter(format!("lambda must be positive, got {lambda}")));
    }
    Ok(())
}

/// Memberships plus the free energy `-lambda * sum_i logsumexp_j(-d_ij / lambda + ln alpha_j)`,
/// which equals `sum u d + lambda sum u ln(u / alpha)` at the returned `U`.
fn membership_with_energy(
    x: &PointSet,
    t: &PointSet,
    sigma2: f64,
    alpha: &[f64],
    lambda: f64,
) -> (MembershipMatrix, f64) {
    let cols = t.len();
    let scale = 1.0 / (lambda * sigma2);
    let log_alpha: Vec<f64> = alpha.iter().map(|a| a.ln()).collect();
    let mut data = vec![0.0; x.len() * cols];
    let mut energy = 0.0;
    for (p, out) in x.iter().zip(data.chunks_exact_mut(cols)) {
        let mut max = f64::NEG_INFINITY;
        for ((o, q), la) in out.iter_mut().zip(t.iter()).zip(&log_alpha) {
            let logit = -sq_dist(p, q) * scale + la;
            *o = logit;
            if logit > max {
                max = logit;
            }
        }
        let mut sum = 0.0;
        if max.is_finite() {
            for o in out.iter_mut() {
                *o = (*o - max).exp();
                sum += *o;
            }
        }
        if sum > 0.0 && sum.is_finite() {
            let inv = 1.0 / sum;
            out.iter_mut().for_each(|o| *o *= inv);
            energy -= lambda * (max + sum.ln());
        } else {
            // Whole row underflowed: fall back to the nearest centroid.
            let mut best = 0;
            let mut best_d = f64::INFINITY;
            for (j, q) in t.iter().enumerate() {
                let d = sq_dist(p, q);
                if d < best_d {
                    best_d = d;
                    best = j;
                }
            }
            out.iter_mut().for_each(|o| *o = 0.0);
            out[best] = 1.0;
            energy += best_d / sigma2;
        }
    }
    (
        MembershipMatrix {
            rows: x.len(),
            cols,
            data,
        },
        energy,
    )
}

/// `U = diag(A 1)^-1 A` with `A = exp(-D / lambda) diag(alpha)` and
/// `d_ij = ||x_i - t_j||^2 / sigma2`, computed with a per-row max shift.
pub fn update_membership(
    x: &PointSet,
    t: &PointSet,
    sigma2: f64,
    alpha: &[f64],
    lambda: f64,
) -> Result<MembershipMatrix> {
    check_membership_inputs(x, t, sigma2, alpha, lambda)?;
    Ok(membership_with_energy(x, t, sigma2, alpha, lambda).0)
}

/// `alpha = U^T 1_M / M`.
pub fn update_alpha(u: &MembershipMatrix) -> Vec<f64> {
    let inv = 1.0 / u.rows() as f64;
    u.column_sums().into_iter().map(|s| s * inv).collect()
}

fn sigma2_from_moments(moments: &Moments, t: &PointSet, m: usize) -> f64 {
    let n = t.dim();
    let mut cross = 0.0;
    let mut centroid_energy = 0.0;
    for (j, q) in t.iter().enumerate() {
        let w = moments.weighted.row(j);
        cross += w.iter().zip(q).map(|(a, b)| a * b).sum::<f64>();
        centroid_energy += moments.column_sums[j] * q.iter().map(|v| v * v).sum::<f64>();
    }
    let s2 = (moments.target_energy - 2.0 * cross + centroid_energy) / (n * m) as f64;
    if s2.is_finite() {
        s2.max(SIGMA2_FLOOR)
    } else {
        SIGMA2_FLOOR
    }
}

/// `sigma^2 = sum_ij u_ij ||x_i - t_j||^2 / (n M)`, evaluated through the
/// trace expansion
/// `[tr(X^T diag(U 1) X) - 2 tr((U^T X)^T T) + tr(T^T diag(U^T 1) T)] / (n M)`
/// and floored at [`SIGMA2_FLOOR`].
pub fn update_sigma2(x: &PointSet, t: &PointSet, u: &MembershipMatrix) -> Result<f64> {
    x.check_same_dim(t)?;
    if u.rows() != x.len() || u.cols() != t.len() {
        return Err(Error::DimensionMismatch {
            expected: x.len() * t.len(),
            found: u.rows() * u.cols(),
        });
    }
    Ok(sigma2_from_moments(&u.moments(x), t, x.len()))
}

/// Builds `d_j = zeta sigma^2 / s_j` and `B = diag(s)^-1 U^T X - Y`, then solves
/// `(L + diag(d)) c = B`. Returns the coefficients and the number of
/// degenerate columns.
fn solve_coefficients(
    op: &GramOperator,
    column_sums: &[f64],
    weighted: &DMatrix<f64>,
    y: &DMatrix<f64>,
    zeta_sigma2: f64,
) -> Result<(DMatrix<f64>, usize)> {
    let c = y.nrows();
    let mut d = Vec::with_capacity(c);
    let mut b = DMatrix::zeros(c, y.ncols());
    let mut degenerate = 0;
    for (j, &s) in column_sums.iter().enumerate() {
        if s < DEGENERATE_COLUMN_MASS {
            // Freeze this centroid: huge regularization, zero pull.
            degenerate += 1;
            d.push(MAX_REGULARIZATION);
            continue;
        }
        d.push((zeta_sigma2 / s).min(MAX_REGULARIZATION));
        let inv = 1.0 / s;
        for k in 0..y.ncols() {
            b[(j, k)] = weighted[(j, k)] * inv - y[(j, k)];
        }
    }
    Ok((regularized_solve(op, &d, &b)?, degenerate))
}

/// `c = (L + zeta sigma^2 diag(s)^-1)^-1 (diag(s)^-1 U^T X - Y)` with
/// `s = U^T 1_M`.
pub fn update_coefficients(
    op: &GramOperator,
    u: &MembershipMatrix,
    x: &PointSet,
    y: &PointSet,
    zeta: f64,
    sigma2: f64,
) -> Result<DMatrix<f64>> {
    x.check_same_dim(y)?;
    if u.rows() != x.len() || u.cols() != y.len() || op.size() != y.len() {
        return Err(Error::DimensionMismatch {
            expected: y.len(),
            found: u.cols(),
        });
    }
    if !(zeta > 0.0 && sigma2 > 0.0) {
        return Err(Error::InvalidParameter("zeta and sigma2 must be positive".into()));
    }
    let moments = u.moments(x);
    let (c, _) = solve_coefficients(op, &moments.column_sums, &moments.weighted, &y.to_matrix(), zeta * sigma2)?;
    Ok(c)
}

/// `T = Y + L c`.
pub fn apply_deformation(y: &PointSet, op: &GramOperator, c: &DMatrix<f64>) -> Result<PointSet> {
    if c.nrows() != y.len() || c.ncols() != y.dim() || op.size() != y.len() {
        return Err(Error::DimensionMismatch {
            expected: y.len(),
            found: c.nrows(),
        });
    }
    PointSet::from_matrix(&(y.to_matrix() + op.apply(c)))
}

/// `sum_ij ||x_i - y_j||^2 / (n M N)` from first and second moments, without
/// forming the `M x N` distance matrix.
pub fn initial_sigma2(x: &PointSet, y: &PointSet) -> Result<f64> {
    x.check_same_dim(y)?;
    let (m, c) = (x.len() as f64, y.len() as f64);
    let energy = |ps: &PointSet| ps.as_slice().iter().map(|v| v * v).sum::<f64>();
    let sum = |ps: &PointSet| {
        let mut s = vec![0.0; ps.dim()];
        for p in ps.iter() {
            s.iter_mut().zip(p).for_each(|(a, v)| *a += v);
        }
        s
    };
    let cross: f64 = sum(x).iter().zip(sum(y)).map(|(a, b)| a * b).sum();
    let total = c * energy(x) + m * energy(y) - 2.0 * cross;
    Ok((total / (x.dim() as f64 * m * c)).max(SIGMA2_FLOOR))
}

/// Output of [`register`].
#[derive(Debug, Clone)]
pub struct RegistrationResult {
    /// Deformed source, expressed in the target's original frame.
    pub deformed: PointSet,
    /// `C x n` kernel coefficients (normalized frame).
    pub coefficients: DMatrix<f64>,
    pub sigma2_trace: Vec<f64>,
    /// Free energy of the clustering term at each membership update.
    pub objective_trace: Vec<f64>,
    pub iterations: usize,
    pub converged: bool,
    /// Seconds spent in [`register`].
    pub wall_time: f64,
    /// Centroids that attracted no membership mass in the last iteration.
    pub degenerate_columns: usize,
    /// Landmark count of the Nyström factor, `None` for the exact Gram matrix.
    pub landmarks: Option<usize>,
}

impl RegistrationResult {
    pub fn final_sigma2(&self) -> f64 {
        self.sigma2_trace.last().copied().unwrap_or(f64::NAN)
    }
}

/// Runs the loop on sets that are already in a common frame. The deformed set
/// in the result stays in that frame.
pub fn register_normalized(
    source: &PointSet,
    target: &PointSet,
    cfg: &RegistrationConfig,
) -> Result<RegistrationResult> {
    cfg.validate()?;
    source.check_same_dim(target)?;
    let start = Instant::now();
    let m = target.len();
    let c_count = source.len();

    // The kernel is fixed on the original source positions.
    let (op, landmarks) = if cfg.uses_dense_gram() {
        (GramOperator::Dense(gram_matrix(&cfg.kernel, source)), None)
    } else {
        let factor = build_nystrom(&cfg.kernel, source, cfg.approx_ratio, cfg.seed)?;
        let rank = factor.rank();
        (GramOperator::LowRank(factor), Some(rank))
    };

    let y = source.to_matrix();
    let mut t = source.clone();
    let mut alpha = vec![1.0 / c_count as f64; c_count];
    let mut sigma2 = initial_sigma2(target, source)?;
    let mut coefficients = DMatrix::zeros(c_count, source.dim());
    let mut sigma2_trace = Vec::new();
    let mut objective_trace = Vec::new();
    let mut converged = false;
    let mut iterations = 0;
    let mut degenerate_columns = 0;

    while iterations < cfg.max_iters {
        iterations += 1;
        let (u, energy) = membership_with_energy(target, &t, sigma2, &alpha, cfg.lambda);
        alpha = update_alpha(&u);
        let moments = u.moments(target);
        let (c, degenerate) = solve_coefficients(
            &op,
            &moments.column_sums,
            &moments.weighted,
            &y,
            cfg.zeta * sigma2,
        )?;
        t = PointSet::from_matrix(&(&y + op.apply(&c)))?;
        coefficients = c;
        degenerate_columns = degenerate;

        let next = sigma2_from_moments(&moments, &t, m);
        sigma2_trace.push(next);
        objective_trace.push(energy);
        let change = (next - sigma2).abs() / sigma2;
        sigma2 = next;
        if change < cfg.tol {
            converged = true;
            break;
        }
    }

    Ok(RegistrationResult {
        deformed: t,
        coefficients,
        sigma2_trace,
        objective_trace,
        iterations,
        converged,
        wall_time: start.elapsed().as_secs_f64(),
        degenerate_columns,
        landmarks,
    })
}

/// Deforms `source` toward `target`.
///
/// Both sets are normalized independently; the deformed source is mapped back
/// with the target's inverse transform, so it is directly comparable with
/// `target`.
pub fn register(
    source: &PointSet,
    target: &PointSet,
    cfg: &RegistrationConfig,
) -> Result<RegistrationResult> {
    cfg.validate()?;
    source.check_same_dim(target)?;
    let start = Instant::now();
    let source_n = normalize(source)?;
    let target_n = normalize(target)?;
    let mut result = register_normalized(&source_n, &target_n, cfg)?;
    let frame = target_n.norm().expect("normalize records its transform");
    result.deformed = denormalize(&result.deformed, frame)?;
    result.wall_time = start.elapsed().as_secs_f64();
    Ok(result)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::kernel::KernelSpec;
    use crate::nystrom::NystromFactor;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_set(n: usize, dim: usize, seed: u64) -> PointSet {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        PointSet::new(dim, (0..n * dim).map(|_| rng.random::<f64>() * 2.0 - 1.0).collect()).unwrap()
    }

    fn random_stochastic(m: usize, c: usize, seed: u64) -> MembershipMatrix {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut data = Vec::with_capacity(m * c);
        for _ in 0..m {
            let row: Vec<f64> = (0..c).map(|_| rng.random::<f64>() + 1e-3).collect();
            let s: f64 = row.iter().sum();
            data.extend(row.into_iter().map(|v| v / s));
        }
        MembershipMatrix::from_row_major(m, c, data).unwrap()
    }

    #[test]
    fn single_centroid_membership_is_one() {
        let x = random_set(6, 2, 1);
        let t = random_set(1, 2, 2);
        let u = update_membership(&x, &t, 0.3, &[1.0], 0.5).unwrap();
        assert!((0..6).all(|i| u.get(i, 0) == 1.0));
    }

    #[test]
    fn equidistant_point_splits_evenly() {
        let x = PointSet::from_rows(&[[0.0, 0.0]]).unwrap();
        let t = PointSet::from_rows(&[[1.0, 0.0], [-1.0, 0.0]]).unwrap();
        let u = update_membership(&x, &t, 1.0, &[0.5, 0.5], 0.5).unwrap();
        assert_eq!(u.row(0), &[0.5, 0.5]);
    }

    #[test]
    fn membership_matches_direct_softmax() {
        let x = random_set(3, 2, 3);
        let t = random_set(2, 2, 4);
        let alpha = [0.3, 0.7];
        let (sigma2, lambda) = (0.4, 0.5);
        let u = update_membership(&x, &t, sigma2, &alpha, lambda).unwrap();
        for i in 0..3 {
            let logits: Vec<f64> = (0..2)
                .map(|j| -sq_dist(x.point(i), t.point(j)) / sigma2 / lambda + f64::ln(alpha[j]))
                .collect();
            let z: f64 = logits.iter().map(|l| l.exp()).sum();
            for j in 0..2 {
                assert!((u.get(i, j) - logits[j].exp() / z).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn membership_survives_extreme_distances() {
        let x = PointSet::from_rows(&[[1e3, 0.0], [0.0, 0.0]]).unwrap();
        let t = PointSet::from_rows(&[[0.0, 0.0], [1.0, 0.0]]).unwrap();
        let u = update_membership(&x, &t, 1e-8, &[0.5, 0.5], 0.5).unwrap();
        for i in 0..2 {
            let s: f64 = u.row(i).iter().sum();
            assert!((s - 1.0).abs() < 1e-12);
            assert!(u.row(i).iter().all(|v| v.is_finite()));
        }
        assert_eq!(u.row(0), &[0.0, 1.0]);
    }

    #[test]
    fn zero_alpha_column_gets_no_mass() {
        let x = random_set(5, 2, 5);
        let t = random_set(3, 2, 6);
        let u = update_membership(&x, &t, 0.5, &[0.5, 0.0, 0.5], 0.5).unwrap();
        assert!((0..5).all(|i| u.get(i, 1) == 0.0));
    }

    #[test]
    fn membership_input_checks() {
        let x = random_set(3, 2, 1);
        let t = random_set(2, 2, 2);
        assert!(update_membership(&x, &t, 0.0, &[0.5, 0.5], 0.5).is_err());
        assert!(update_membership(&x, &t, 1.0, &[0.5, 0.5], 0.0).is_err());
        assert!(update_membership(&x, &t, 1.0, &[1.0], 0.5).is_err());
        assert!(update_membership(&x, &random_set(2, 3, 2), 1.0, &[0.5, 0.5], 0.5).is_err());
    }

    #[test]
    fn alpha_examples() {
        let u = MembershipMatrix::uniform(4, 5);
        assert!(update_alpha(&u).iter().all(|a| (a - 0.2).abs() < 1e-15));

        let mut hard = vec![0.0; 4 * 3];
        for i in 0..4 {
            hard[i * 3] = 1.0;
        }
        let u = MembershipMatrix::from_row_major(4, 3, hard).unwrap();
        assert_eq!(update_alpha(&u), vec![1.0, 0.0, 0.0]);

        let u = random_stochastic(5, 3, 7);
        let alpha = update_alpha(&u);
        for j in 0..3 {
            let mean = (0..5).map(|i| u.get(i, j)).sum::<f64>() / 5.0;
            assert!((alpha[j] - mean).abs() < 1e-15);
        }
    }

    #[test]
    fn sigma2_examples() {
        let x = PointSet::from_rows(&[[3.0, 4.0]]).unwrap();
        let t = PointSet::from_rows(&[[0.0, 0.0]]).unwrap();
        let u = MembershipMatrix::uniform(1, 1);
        assert_eq!(update_sigma2(&x, &t, &u).unwrap(), 12.5);

        // Memberships only on coincident pairs: true value 0, floored.
        let x = random_set(3, 2, 8);
        let mut data = vec![0.0; 9];
        for i in 0..3 {
            data[i * 3 + i] = 1.0;
        }
        let u = MembershipMatrix::from_row_major(3, 3, data).unwrap();
        assert_eq!(update_sigma2(&x, &x, &u).unwrap(), SIGMA2_FLOOR);
    }

    #[test]
    fn sigma2_matches_double_loop() {
        for seed in 0..20 {
            let x = random_set(6, 3, seed);
            let t = random_set(4, 3, seed + 100);
            let u = random_stochastic(6, 4, seed + 200);
            let mut brute = 0.0;
            for i in 0..6 {
                for j in 0..4 {
                    brute += u.get(i, j) * sq_dist(x.point(i), t.point(j));
                }
            }
            brute /= 3.0 * 6.0;
            let got = update_sigma2(&x, &t, &u).unwrap();
            assert!((got - brute).abs() <= 1e-12 * brute);
        }
    }

    #[test]
    fn coefficients_vanish_when_already_aligned() {
        let y = random_set(8, 2, 9);
        let mut data = vec![0.0; 64];
        for i in 0..8 {
            data[i * 8 + i] = 1.0;
        }
        let u = MembershipMatrix::from_row_major(8, 8, data).unwrap();
        let op = GramOperator::Dense(gram_matrix(&KernelSpec::default(), &y));
        let c = update_coefficients(&op, &u, &y, &y, 0.1, 0.2).unwrap();
        assert!(c.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn coefficients_single_centroid_closed_form() {
        let x = random_set(5, 2, 10);
        let y = PointSet::from_rows(&[[0.2, -0.1]]).unwrap();
        let u = MembershipMatrix::uniform(5, 1);
        let op = GramOperator::Dense(gram_matrix(&KernelSpec::default(), &y));
        let (zeta, sigma2) = (0.1, 0.3);
        let c = update_coefficients(&op, &u, &x, &y, zeta, sigma2).unwrap();
        let s = 5.0;
        let mean = x.centroid();
        for k in 0..2 {
            let expected = (mean[k] - y.point(0)[k]) / (1.0 + zeta * sigma2 / s);
            assert!((c[(0, k)] - expected).abs() < 1e-14);
        }
    }

    #[test]
    fn coefficients_match_dense_direct_solve() {
        let spec = KernelSpec::laplacian(2.0).unwrap();
        let y = random_set(30, 2, 11);
        let x = random_set(40, 2, 12);
        let u = random_stochastic(40, 30, 13);
        let zeta_sigma2: f64 = 0.05;
        let l = gram_matrix(&spec, &y);
        let c = update_coefficients(&GramOperator::Dense(l.clone()), &u, &x, &y, 0.5, 0.1).unwrap();

        // Oracle: LU solve of the explicitly assembled system.
        let um = u.to_matrix();
        let s = um.row_sum_tr();
        let mut a = l;
        for j in 0..30 {
            a[(j, j)] += zeta_sigma2 / s[j];
        }
        let sinv = DMatrix::from_diagonal(&s.map(|v| 1.0 / v));
        let b = &sinv * um.transpose() * x.to_matrix() - y.to_matrix();
        let oracle = a.lu().solve(&b).unwrap();
        assert!((&c - &oracle).norm() / oracle.norm() < 1e-8);
    }

    #[test]
    fn degenerate_column_is_frozen() {
        let y = random_set(3, 2, 14);
        let x = random_set(4, 2, 15);
        let mut data = vec![0.0; 12];
        for i in 0..4 {
            data[i * 3] = 0.5;
            data[i * 3 + 1] = 0.5;
        }
        let u = MembershipMatrix::from_row_major(4, 3, data).unwrap();
        let op = GramOperator::Dense(gram_matrix(&KernelSpec::default(), &y));
        let c = update_coefficients(&op, &u, &x, &y, 0.1, 0.1).unwrap();
        assert!(c.iter().all(|v| v.is_finite()));
        assert!(c.row(2).norm() < 1e-9);
    }

    #[test]
    fn deformation_examples() {
        let spec = KernelSpec::default();
        let y = random_set(10, 3, 16);
        let op = GramOperator::Dense(gram_matrix(&spec, &y));
        let t = apply_deformation(&y, &op, &DMatrix::zeros(10, 3)).unwrap();
        assert_eq!(t, y);

        let one = PointSet::from_rows(&[[1.0, 2.0]]).unwrap();
        let op1 = GramOperator::Dense(gram_matrix(&spec, &one));
        let c = DMatrix::from_row_slice(1, 2, &[0.25, -0.5]);
        assert_eq!(apply_deformation(&one, &op1, &c).unwrap().point(0), &[1.25, 1.5]);

        let c = DMatrix::from_fn(10, 3, |i, j| (i as f64 - j as f64) * 0.01);
        let dense = apply_deformation(&y, &op, &c).unwrap();
        let factor = NystromFactor::from_landmarks(&spec, &y, y.clone()).unwrap();
        let low = apply_deformation(&y, &GramOperator::LowRank(factor), &c).unwrap();
        let diff = (dense.to_matrix() - low.to_matrix()).norm() / dense.to_matrix().norm();
        assert!(diff < 1e-6);
    }

    #[test]
    fn initial_sigma2_matches_pairwise_sum() {
        let x = random_set(7, 2, 17);
        let y = random_set(5, 2, 18);
        let mut brute = 0.0;
        for p in x.iter() {
            for q in y.iter() {
                brute += sq_dist(p, q);
            }
        }
        brute /= 2.0 * 7.0 * 5.0;
        assert!((initial_sigma2(&x, &y).unwrap() - brute).abs() < 1e-12 * brute);
    }

    #[test]
    fn identical_sets_register_quickly() {
        let cfg = RegistrationConfig {
            max_iters: 5,
            ..Default::default()
        };
        for y in [crate::eval::fixtures::ring(200), crate::eval::fixtures::sphere(300)] {
            let r = register(&y, &y, &cfg).unwrap();
            assert!(r.iterations <= 5);
            let rmse = ((r.deformed.to_matrix() - y.to_matrix()).norm_squared() / y.len() as f64).sqrt();
            assert!(rmse < 1e-3, "rmse {rmse}");
        }
    }

    #[test]
    fn identical_irregular_set_reaches_fixed_point() {
        let y = random_set(60, 2, 19);
        let r = register(&y, &y, &RegistrationConfig::default()).unwrap();
        let rmse = ((r.deformed.to_matrix() - y.to_matrix()).norm_squared() / 60.0).sqrt();
        assert!(rmse < 1e-3, "rmse {rmse}");
    }

    #[test]
    fn translation_is_recovered() {
        // Independent normalization absorbs the shift, so this exercises the
        // denormalization into the target frame.
        let y = crate::eval::fixtures::ring(300);
        let x = PointSet::new(2, y.as_slice().iter().enumerate().map(|(k, v)| if k % 2 == 0 { v + 0.1 } else { *v }).collect()).unwrap();
        let cfg = RegistrationConfig {
            max_iters: 30,
            ..Default::default()
        };
        let r = register(&y, &x, &cfg).unwrap();
        assert!(r.iterations <= 30);
        let rmse = ((r.deformed.to_matrix() - x.to_matrix()).norm_squared() / 300.0).sqrt();
        assert!(rmse < 1e-2, "rmse {rmse}");
    }

    #[test]
    fn register_rejects_mismatched_dims() {
        let a = random_set(10, 2, 1);
        let b = random_set(10, 3, 2);
        assert!(matches!(
            register(&a, &b, &RegistrationConfig::default()),
            Err(Error::DimensionMismatch { .. })
        ));
    }

    #[test]
    fn register_is_deterministic() {
        let y = random_set(80, 3, 20);
        let x = random_set(90, 3, 21);
        let cfg = RegistrationConfig::default();
        let a = register(&y, &x, &cfg).unwrap();
        let b = register(&y, &x, &cfg).unwrap();
        assert_eq!(a.sigma2_trace, b.sigma2_trace);
        assert_eq!(a.objective_trace, b.objective_trace);
        assert_eq!(a.deformed, b.deformed);
        assert!(a.sigma2_trace.iter().all(|&s| s > 0.0));
    }
}
