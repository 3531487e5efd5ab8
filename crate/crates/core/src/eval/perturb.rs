//! Noise, occlusion and smooth random warps for synthetic experiments.

use rand::seq::index::sample;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal, StandardNormal};

use super::Correspondence;
use crate::error::{Error, Result};
use crate::points::PointSet;

/// Number of Gaussian bumps in [`synthetic_warp`].
pub const WARP_BUMPS: usize = 5;
pub const DEFAULT_WARP_BANDWIDTH: f64 = 0.5;

/// Adds independent `N(0, sigma^2)` noise to every coordinate.
pub fn add_noise(ps: &PointSet, sigma: f64, seed: u64) -> Result<PointSet> {
    if !(sigma >= 0.0 && sigma.is_finite()) {
        return Err(Error::InvalidParameter(format!("noise sigma must be >= 0, got {sigma}")));
    }
    if sigma == 0.0 {
        return Ok(ps.clone());
    }
    let normal = Normal::new(0.0, sigma).expect("sigma checked above");
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let coords = ps.as_slice().iter().map(|v| v + normal.sample(&mut rng)).collect();
    PointSet::new(ps.dim(), coords)
}

/// Sorted indices that survive removing `round(fraction * P)` uniformly
/// chosen points.
pub fn occlude_indices(len: usize, fraction: f64, seed: u64) -> Result<Vec<usize>> {
    if !(0.0..1.0).contains(&fraction) {
        return Err(Error::InvalidParameter(format!(
            "occlusion fraction must lie in [0, 1), got {fraction}"
        )));
    }
    let remove = (fraction * len as f64).round() as usize;
    if remove >= len {
        return Err(Error::DegenerateInput(format!(
            "occluding {remove} of {len} points leaves nothing"
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut dropped = vec![false; len];
    for i in sample(&mut rng, len, remove) {
        dropped[i] = true;
    }
    Ok((0..len).filter(|&i| !dropped[i]).collect())
}

pub fn occlude(ps: &PointSet, fraction: f64, seed: u64) -> Result<PointSet> {
    if fraction == 0.0 {
        return Ok(ps.clone());
    }
    ps.select(&occlude_indices(ps.len(), fraction, seed)?)
}

/// Displaces every point by a sum of [`WARP_BUMPS`] Gaussian bumps
/// `v_k exp(-||p - c_k||^2 / (2 bandwidth^2))`, with centers drawn from the
/// set and `v_k ~ N(0, I)`, rescaled so the largest displacement equals
/// `magnitude`. Returns the warped set and the index-identity pairing.
pub fn synthetic_warp(
    ps: &PointSet,
    magnitude: f64,
    bandwidth: f64,
    seed: u64,
) -> Result<(PointSet, Correspondence)> {
    if !(magnitude >= 0.0 && magnitude.is_finite()) {
        return Err(Error::InvalidParameter(format!("warp magnitude must be >= 0, got {magnitude}")));
    }
    if !(bandwidth > 0.0 && bandwidth.is_finite()) {
        return Err(Error::InvalidParameter(format!("warp bandwidth must be positive, got {bandwidth}")));
    }
    let truth = Correspondence::ground_truth(ps.len());
    if magnitude == 0.0 {
        return Ok((ps.clone(), truth));
    }
    let dim = ps.dim();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let centers: Vec<usize> = (0..WARP_BUMPS).map(|_| rng.random_range(0..ps.len())).collect();
    let vectors: Vec<f64> = (0..WARP_BUMPS * dim).map(|_| StandardNormal.sample(&mut rng)).collect();
    let inv = 1.0 / (2.0 * bandwidth * bandwidth);

    let mut field = vec![0.0; ps.len() * dim];
    for (p, out) in ps.iter().zip(field.chunks_exact_mut(dim)) {
        for (k, &c) in centers.iter().enumerate() {
            let d2: f64 = p.iter().zip(ps.point(c)).map(|(a, b)| (a - b) * (a - b)).sum();
            let w = (-d2 * inv).exp();
            for (o, v) in out.iter_mut().zip(&vectors[k * dim..(k + 1) * dim]) {
                *o += w * v;
            }
        }
    }
    let max = field
        .chunks_exact(dim)
        .map(|f| f.iter().map(|v| v * v).sum::<f64>().sqrt())
        .fold(0.0, f64::max);
    if max == 0.0 {
        return Ok((ps.clone(), truth));
    }
    let scale = magnitude / max;
    let coords = ps.as_slice().iter().zip(&field).map(|(p, f)| p + scale * f).collect();
    Ok((PointSet::new(dim, coords)?, truth))
}
