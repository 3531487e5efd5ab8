//! Elkan's triangle-inequality accelerated k-means, plus a plain Lloyd
//! reference used to audit it.
//!
//! Both variants share the k-means++ seeding, the empty-cluster repair and the
//! centroid update, so for identical inputs they walk the same sequence of
//! assignments. Elkan only skips point-centroid distances that the bounds
//! prove cannot change the nearest centroid; every pruning test is strict and
//! carries a small absolute margin so ties and rounding never prune a
//! candidate that Lloyd's argmin would pick (lowest index wins ties).

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::points::PointSet;

pub const DEFAULT_MAX_ITERS: usize = 100;

/// Output of a k-means run.
#[derive(Debug, Clone)]
pub struct KMeansResult {
    /// The `k` centroids `z_i`.
    pub centroids: PointSet,
    /// `assignment[j]` is the index of the centroid nearest to point `j`.
    pub assignment: Vec<usize>,
    /// `q = sum_j ||y_j - z_assignment[j]||^2`.
    pub quantization_error: f64,
    /// Size of the largest cluster.
    pub max_cluster_size: usize,
    pub iterations: usize,
    /// True when the last iteration changed no assignment.
    pub converged: bool,
    /// Number of point-to-centroid distance evaluations (seeding excluded).
    pub distance_evaluations: u64,
    /// Quantization error after every assignment step. The Elkan variant only
    /// tracks exact distances lazily, so it records the final value alone.
    pub quantization_trace: Vec<f64>,
}

impl KMeansResult {
    pub fn cluster_sizes(&self) -> Vec<usize> {
        let mut sizes = vec![0; self.centroids.len()];
        for &a in &self.assignment {
            sizes[a] += 1;
        }
        sizes
    }
}

#[inline]
fn sq_dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

struct Centroids {
    dim: usize,
    data: Vec<f64>,
}

impl Centroids {
    fn get(&self, c: usize) -> &[f64] {
        &self.data[c * self.dim..(c + 1) * self.dim]
    }

    fn len(&self) -> usize {
        self.data.len() / self.dim
    }
}

fn validate(pts: &PointSet, k: usize, max_iters: usize) -> Result<()> {
    if k < 1 || k > pts.len() {
        return Err(Error::InvalidK {
            k,
            points: pts.len(),
        });
    }
    if max_iters < 1 {
        return Err(Error::InvalidParameter("max_iters must be >= 1".into()));
    }
    Ok(())
}

/// k-means++ seeding driven by a ChaCha8 stream seeded with `seed`.
fn seed_plus_plus(pts: &PointSet, k: usize, seed: u64) -> Centroids {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n = pts.len();
    let dim = pts.dim();
    let mut chosen = vec![false; n];
    let mut data = Vec::with_capacity(k * dim);

    let first = rng.random_range(0..n);
    chosen[first] = true;
    data.extend_from_slice(pts.point(first));
    let mut d2: Vec<f64> = pts.iter().map(|p| sq_dist(p, pts.point(first))).collect();

    for _ in 1..k {
        let total: f64 = d2.iter().sum();
        let pick = if total > 0.0 {
            let r = rng.random::<f64>() * total;
            let mut acc = 0.0;
            let mut pick = None;
            let mut last_positive = None;
            for (i, &w) in d2.iter().enumerate() {
                if w > 0.0 {
                    last_positive = Some(i);
                    acc += w;
                    if acc > r {
                        pick = Some(i);
                        break;
                    }
                }
            }
            pick.or(last_positive).expect("positive total implies a positive weight")
        } else {
            // Every remaining point duplicates a centroid.
            chosen.iter().position(|c| !c).expect("k <= P")
        };
        chosen[pick] = true;
        let p = pts.point(pick);
        data.extend_from_slice(p);
        for (w, q) in d2.iter_mut().zip(pts.iter()) {
            let d = sq_dist(q, p);
            if d < *w {
                *w = d;
            }
        }
    }
    Centroids { dim, data }
}

fn cluster_means(pts: &PointSet, assignment: &[usize], k: usize) -> Centroids {
    let dim = pts.dim();
    let mut data = vec![0.0; k * dim];
    let mut counts = vec![0usize; k];
    for (p, &a) in pts.iter().zip(assignment) {
        counts[a] += 1;
        for (acc, v) in data[a * dim..(a + 1) * dim].iter_mut().zip(p) {
            *acc += v;
        }
    }
    for (c, &cnt) in counts.iter().enumerate() {
        // repair_empty guarantees cnt > 0
        let inv = 1.0 / cnt as f64;
        data[c * dim..(c + 1) * dim].iter_mut().for_each(|v| *v *= inv);
    }
    Centroids { dim, data }
}

/// Moves each empty cluster onto the point farthest from its current
/// centroid. Returns whether anything was repaired.
fn repair_empty(
    pts: &PointSet,
    centroids: &Centroids,
    assignment: &mut [usize],
    evals: &mut u64,
) -> bool {
    let k = centroids.len();
    let mut counts = vec![0usize; k];
    for &a in assignment.iter() {
        counts[a] += 1;
    }
    if counts.iter().all(|&c| c > 0) {
        return false;
    }
    let mut dist: Vec<f64> = pts
        .iter()
        .zip(assignment.iter())
        .map(|(p, &a)| sq_dist(p, centroids.get(a)))
        .collect();
    *evals += pts.len() as u64;
    for empty in 0..k {
        if counts[empty] > 0 {
            continue;
        }
        let mut best: Option<usize> = None;
        for i in 0..pts.len() {
            if counts[assignment[i]] <= 1 {
                continue;
            }
            if best.is_none_or(|b| dist[i] > dist[b]) {
                best = Some(i);
            }
        }
        let i = best.expect("k <= P leaves a cluster with at least two members");
        counts[assignment[i]] -= 1;
        assignment[i] = empty;
        counts[empty] = 1;
        dist[i] = 0.0;
    }
    true
}

/// Exact nearest centroid for every point; fills `d2` with all squared distances
/// when provided (row-major `P x k`).
fn assign_exact(
    pts: &PointSet,
    centroids: &Centroids,
    assignment: &mut [usize],
    best_d2: &mut [f64],
    mut all_d2: Option<&mut [f64]>,
) {
    let k = centroids.len();
    for (i, p) in pts.iter().enumerate() {
        let mut best = 0;
        let mut best_val = f64::INFINITY;
        for c in 0..k {
            let d = sq_dist(p, centroids.get(c));
            if let Some(all) = all_d2.as_deref_mut() {
                all[i * k + c] = d;
            }
            if d < best_val {
                best_val = d;
                best = c;
            }
        }
        assignment[i] = best;
        best_d2[i] = best_val;
    }
}

fn finish(
    pts: &PointSet,
    centroids: Centroids,
    assignment: Vec<usize>,
    quantization_error: f64,
    iterations: usize,
    converged: bool,
    distance_evaluations: u64,
    quantization_trace: Vec<f64>,
) -> Result<KMeansResult> {
    let k = centroids.len();
    let mut sizes = vec![0usize; k];
    for &a in &assignment {
        sizes[a] += 1;
    }
    Ok(KMeansResult {
        centroids: PointSet::new(pts.dim(), centroids.data)?,
        assignment,
        quantization_error,
        max_cluster_size: sizes.into_iter().max().unwrap_or(0),
        iterations,
        converged,
        distance_evaluations,
        quantization_trace,
    })
}

/// Plain Lloyd iteration with the same seeding and repair rules as
/// [`kmeans_elkan`]. Computes every point-centroid distance each step.
pub fn kmeans_lloyd_reference(
    pts: &PointSet,
    k: usize,
    seed: u64,
    max_iters: usize,
) -> Result<KMeansResult> {
    validate(pts, k, max_iters)?;
    let n = pts.len();
    let mut centroids = seed_plus_plus(pts, k, seed);
    let mut assignment = vec![0usize; n];
    let mut d2 = vec![0.0; n];
    let mut evals = 0u64;

    assign_exact(pts, &centroids, &mut assignment, &mut d2, None);
    evals += (n * k) as u64;
    let mut trace = vec![d2.iter().sum::<f64>()];

    let mut iterations = 0;
    let mut converged = false;
    let mut next = vec![0usize; n];
    while iterations < max_iters {
        iterations += 1;
        repair_empty(pts, &centroids, &mut assignment, &mut evals);
        centroids = cluster_means(pts, &assignment, k);
        assign_exact(pts, &centroids, &mut next, &mut d2, None);
        evals += (n * k) as u64;
        trace.push(d2.iter().sum());
        let changed = next != assignment;
        std::mem::swap(&mut assignment, &mut next);
        if !changed {
            converged = true;
            break;
        }
    }
    let q = *trace.last().expect("trace is never empty");
    finish(pts, centroids, assignment, q, iterations, converged, evals, trace)
}

/// Elkan (2003) k-means: Lloyd's iteration with per-point upper/lower
/// distance bounds and centroid-centroid distances used to skip work.
///
/// Produces the same assignments and centroids as [`kmeans_lloyd_reference`]
/// for identical `(pts, k, seed, max_iters)`.
pub fn kmeans_elkan(pts: &PointSet, k: usize, seed: u64, max_iters: usize) -> Result<KMeansResult> {
    validate(pts, k, max_iters)?;
    let n = pts.len();
    let extent = pts.as_slice().iter().fold(0.0f64, |m, v| m.max(v.abs()));
    let margin = 1e-9 * extent;

    let mut centroids = seed_plus_plus(pts, k, seed);
    let mut assignment = vec![0usize; n];
    let mut upper2 = vec![0.0; n];
    let mut upper = vec![0.0; n];
    let mut fresh = vec![true; n];
    let mut lower = vec![0.0; n * k];
    let mut evals = 0u64;

    let reset_bounds = |centroids: &Centroids,
                            assignment: &mut [usize],
                            upper2: &mut [f64],
                            upper: &mut [f64],
                            fresh: &mut [bool],
                            lower: &mut [f64]| {
        assign_exact(pts, centroids, assignment, upper2, Some(lower));
        for v in lower.iter_mut() {
            *v = v.sqrt();
        }
        for (u, u2) in upper.iter_mut().zip(upper2.iter()) {
            *u = u2.sqrt();
        }
        fresh.iter_mut().for_each(|f| *f = true);
    };

    reset_bounds(&centroids, &mut assignment, &mut upper2, &mut upper, &mut fresh, &mut lower);
    evals += (n * k) as u64;

    let mut iterations = 0;
    let mut converged = false;
    let mut half_cc = vec![0.0; k * k];
    let mut half_sep = vec![0.0; k];
    let mut previous = assignment.clone();
    while iterations < max_iters {
        iterations += 1;
        previous.copy_from_slice(&assignment);
        let repaired = repair_empty(pts, &centroids, &mut assignment, &mut evals);
        let updated = cluster_means(pts, &assignment, k);

        if repaired {
            // Compare against the repaired assignment, as Lloyd does.
            previous.copy_from_slice(&assignment);
            centroids = updated;
            reset_bounds(&centroids, &mut assignment, &mut upper2, &mut upper, &mut fresh, &mut lower);
            evals += (n * k) as u64;
            if assignment == previous {
                converged = true;
                break;
            }
            continue;
        }

        // Shift bounds by how far each centroid moved.
        let movement: Vec<f64> = (0..k)
            .map(|c| sq_dist(centroids.get(c), updated.get(c)).sqrt())
            .collect();
        centroids = updated;
        for i in 0..n {
            for c in 0..k {
                let l = &mut lower[i * k + c];
                *l = (*l - movement[c]).max(0.0);
            }
            upper[i] += movement[assignment[i]];
            fresh[i] = false;
        }

        for a in 0..k {
            half_cc[a * k + a] = 0.0;
            for b in (a + 1)..k {
                let h = 0.5 * sq_dist(centroids.get(a), centroids.get(b)).sqrt();
                half_cc[a * k + b] = h;
                half_cc[b * k + a] = h;
            }
        }
        for a in 0..k {
            half_sep[a] = (0..k)
                .filter(|&b| b != a)
                .map(|b| half_cc[a * k + b])
                .fold(f64::INFINITY, f64::min);
        }

        for i in 0..n {
            if upper[i] + margin < half_sep[assignment[i]] {
                continue;
            }
            let p = pts.point(i);
            for c in 0..k {
                let a = assignment[i];
                if c == a {
                    continue;
                }
                let z = lower[i * k + c].max(half_cc[a * k + c]);
                if upper[i] + margin < z {
                    continue;
                }
                if !fresh[i] {
                    let d2 = sq_dist(p, centroids.get(a));
                    evals += 1;
                    upper2[i] = d2;
                    upper[i] = d2.sqrt();
                    lower[i * k + a] = upper[i];
                    fresh[i] = true;
                    if upper[i] + margin < z {
                        continue;
                    }
                }
                let d2 = sq_dist(p, centroids.get(c));
                evals += 1;
                lower[i * k + c] = d2.sqrt();
                if d2 < upper2[i] || (d2 == upper2[i] && c < a) {
                    assignment[i] = c;
                    upper2[i] = d2;
                    upper[i] = d2.sqrt();
                }
            }
        }

        if assignment == previous {
            converged = true;
            break;
        }
    }

    let q: f64 = pts
        .iter()
        .zip(&assignment)
        .map(|(p, &a)| sq_dist(p, centroids.get(a)))
        .sum();
    evals += n as u64;
    finish(pts, centroids, assignment, q, iterations, converged, evals, vec![q])
}
