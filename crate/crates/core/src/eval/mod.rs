//! Registration quality metrics and synthetic experiment generators.

mod bench;
pub mod fixtures;
mod kdtree;
mod perturb;

pub use bench::{run_case, synthetic_pair, BenchCase, BenchGrid, BenchRow, SyntheticPair, BENCH_CSV_HEADER};
pub use kdtree::KdTree;
pub use perturb::{add_noise, occlude, occlude_indices, synthetic_warp, DEFAULT_WARP_BANDWIDTH, WARP_BUMPS};

use crate::error::{Error, Result};
use crate::points::PointSet;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PairingMode {
    /// Index identity between sets of equal size.
    GroundTruth,
    NearestNeighbor,
    /// Explicit pairs, e.g. read from a pairing file or left after occlusion.
    Given,
}

/// Pairs of `(deformed index, target index)`.
#[derive(Debug, Clone, PartialEq)]
pub struct Correspondence {
    pairs: Vec<(usize, usize)>,
    mode: PairingMode,
}

impl Correspondence {
    pub fn ground_truth(len: usize) -> Self {
        Self {
            pairs: (0..len).map(|i| (i, i)).collect(),
            mode: PairingMode::GroundTruth,
        }
    }

    pub fn given(pairs: Vec<(usize, usize)>) -> Self {
        Self {
            pairs,
            mode: PairingMode::Given,
        }
    }

    pub fn pairs(&self) -> &[(usize, usize)] {
        &self.pairs
    }

    pub fn mode(&self) -> PairingMode {
        self.mode
    }

    pub fn len(&self) -> usize {
        self.pairs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.pairs.is_empty()
    }

    /// Checks index ranges and, for ground truth, equal cardinalities.
    pub fn validate(&self, deformed_len: usize, target_len: usize) -> Result<()> {
        if self.mode == PairingMode::GroundTruth && deformed_len != target_len {
            return Err(Error::InvalidCorrespondence(format!(
                "ground-truth pairing needs equal sizes, got {deformed_len} and {target_len}"
            )));
        }
        if let Some(&(d, t)) = self
            .pairs
            .iter()
            .find(|&&(d, t)| d >= deformed_len || t >= target_len)
        {
            return Err(Error::InvalidCorrespondence(format!(
                "pair ({d}, {t}) out of range for sizes {deformed_len} and {target_len}"
            )));
        }
        Ok(())
    }
}

/// `sqrt(sum ||t - x||^2 / M)` over the `M` pairs.
pub fn rmse(deformed: &PointSet, target: &PointSet, corr: &Correspondence) -> Result<f64> {
    if corr.is_empty() {
        return Err(Error::EmptyCorrespondence);
    }
    deformed.check_same_dim(target)?;
    corr.validate(deformed.len(), target.len())?;
    let total: f64 = corr
        .pairs
        .iter()
        .map(|&(d, t)| {
            deformed
                .point(d)
                .iter()
                .zip(target.point(t))
                .map(|(a, b)| (a - b) * (a - b))
                .sum::<f64>()
        })
        .sum();
    Ok((total / corr.len() as f64).sqrt())
}

/// Pairs every deformed point with its Euclidean-nearest target point (ties
/// to the lowest target index).
pub fn nearest_neighbor_pairs(deformed: &PointSet, target: &PointSet) -> Result<Correspondence> {
    deformed.check_same_dim(target)?;
    let tree = KdTree::new(target);
    Ok(Correspondence {
        pairs: deformed
            .iter()
            .enumerate()
            .map(|(i, p)| (i, tree.nearest(p).0))
            .collect(),
        mode: PairingMode::NearestNeighbor,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_set(n: usize, dim: usize, seed: u64) -> PointSet {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        PointSet::new(dim, (0..n * dim).map(|_| rng.random::<f64>()).collect()).unwrap()
    }

    #[test]
    fn rmse_examples() {
        let a = random_set(20, 3, 1);
        assert_eq!(rmse(&a, &a, &Correspondence::ground_truth(20)).unwrap(), 0.0);

        let x = PointSet::from_rows(&[[0.0, 0.0]]).unwrap();
        let y = PointSet::from_rows(&[[3.0, 4.0]]).unwrap();
        assert_eq!(rmse(&x, &y, &Correspondence::ground_truth(1)).unwrap(), 5.0);

        let b = random_set(10, 2, 2);
        let c = random_set(10, 2, 3);
        let mut total = 0.0;
        for i in 0..10 {
            for k in 0..2 {
                total += (b.point(i)[k] - c.point(i)[k]).powi(2);
            }
        }
        let expected = (total / 10.0).sqrt();
        let got = rmse(&b, &c, &Correspondence::ground_truth(10)).unwrap();
        assert!((got - expected).abs() < 1e-12);
        let swapped = rmse(&c, &b, &Correspondence::ground_truth(10)).unwrap();
        assert_eq!(got, swapped);
    }

    #[test]
    fn rmse_errors() {
        let a = random_set(3, 2, 1);
        let b = random_set(4, 2, 2);
        assert!(matches!(
            rmse(&a, &b, &Correspondence::given(vec![])),
            Err(Error::EmptyCorrespondence)
        ));
        assert!(matches!(
            rmse(&a, &b, &Correspondence::ground_truth(3)),
            Err(Error::InvalidCorrespondence(_))
        ));
        assert!(matches!(
            rmse(&a, &b, &Correspondence::given(vec![(0, 4)])),
            Err(Error::InvalidCorrespondence(_))
        ));
        assert!(rmse(&a, &b, &Correspondence::given(vec![(2, 3)])).is_ok());
    }

    #[test]
    fn nearest_neighbor_examples() {
        let a = random_set(50, 2, 4);
        let nn = nearest_neighbor_pairs(&a, &a).unwrap();
        assert_eq!(nn.pairs(), Correspondence::ground_truth(50).pairs());
        assert_eq!(nn.mode(), PairingMode::NearestNeighbor);

        let targets = PointSet::from_rows(&[[0.0, 0.0], [1.0, 0.0]]).unwrap();
        let q = PointSet::from_rows(&[[0.8, 0.1]]).unwrap();
        assert_eq!(nearest_neighbor_pairs(&q, &targets).unwrap().pairs(), &[(0, 1)]);
    }

    #[test]
    fn nearest_neighbor_matches_scan() {
        let d = random_set(100, 3, 5);
        let t = random_set(100, 3, 6);
        let nn = nearest_neighbor_pairs(&d, &t).unwrap();
        for (i, p) in d.iter().enumerate() {
            let mut best = (0, f64::INFINITY);
            for (j, q) in t.iter().enumerate() {
                let dist: f64 = p.iter().zip(q).map(|(a, b)| (a - b) * (a - b)).sum();
                if dist < best.1 {
                    best = (j, dist);
                }
            }
            assert_eq!(nn.pairs()[i], (i, best.0));
        }
    }
}
