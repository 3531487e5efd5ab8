//! Built-in shapes for synthetic experiments. All shapes except
//! [`uniform`] are returned centered with unit RMS radius.

use std::f64::consts::PI;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::points::{normalize, PointSet};

fn normalized(dim: usize, coords: Vec<f64>) -> PointSet {
    let ps = PointSet::new(dim, coords).expect("fixture coordinates are finite");
    normalize(&ps).expect("fixtures are non-degenerate").with_norm(None)
}

/// `n >= 2` points at equally spaced angles on a circle.
pub fn ring(n: usize) -> PointSet {
    let coords = (0..n)
        .flat_map(|i| {
            let a = 2.0 * PI * i as f64 / n as f64;
            [a.cos(), a.sin()]
        })
        .collect();
    normalized(2, coords)
}

/// `nx * ny` points on a regular lattice, row by row.
pub fn grid(nx: usize, ny: usize) -> PointSet {
    let coords = (0..ny)
        .flat_map(|j| (0..nx).flat_map(move |i| [i as f64, j as f64]))
        .collect();
    normalized(2, coords)
}

/// `n >= 2` points on a sphere along a Fibonacci spiral.
pub fn sphere(n: usize) -> PointSet {
    let golden = PI * (3.0 - 5f64.sqrt());
    let coords = (0..n)
        .flat_map(|i| {
            let z = 1.0 - 2.0 * (i as f64 + 0.5) / n as f64;
            let r = (1.0 - z * z).sqrt();
            let a = golden * i as f64;
            [r * a.cos(), r * a.sin(), z]
        })
        .collect();
    normalized(3, coords)
}

/// Closed fish-shaped outline `(cos t - sin^2 t / sqrt 2, cos t sin t)`,
/// sampled at `n >= 2` equally spaced parameters.
pub fn fish(n: usize) -> PointSet {
    let coords = (0..n)
        .flat_map(|i| {
            let t = 2.0 * PI * i as f64 / n as f64;
            [t.cos() - t.sin().powi(2) / 2f64.sqrt(), t.cos() * t.sin()]
        })
        .collect();
    normalized(2, coords)
}

/// `n` points drawn uniformly from the unit cube `[0, 1]^dim`.
pub fn uniform(n: usize, dim: usize, seed: u64) -> PointSet {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    PointSet::new(dim, (0..n * dim).map(|_| rng.random::<f64>()).collect())
        .expect("uniform samples are finite")
}
