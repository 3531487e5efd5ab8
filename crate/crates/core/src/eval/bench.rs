//! Robustness experiments: warp a base shape, perturb the source, register,
//! and report ground-truth RMSE before and after.

use super::{add_noise, occlude_indices, rmse, synthetic_warp, Correspondence, DEFAULT_WARP_BANDWIDTH};
use crate::config::RegistrationConfig;
use crate::error::Result;
use crate::kernel::{KernelFamily, KernelSpec};
use crate::points::{normalize, PointSet};
use crate::solver::register;

pub const BENCH_CSV_HEADER: &str =
    "experiment,kernel,gamma,noise_sigma,occlusion,seed,rmse_pre,rmse_post,iters,seconds";

// Offsets that decorrelate the noise and occlusion streams from the warp.
const NOISE_STREAM: u64 = 0x9e37_79b9_7f4a_7c15;
const OCCLUSION_STREAM: u64 = 0xbf58_476d_1ce4_e5b9;

#[derive(Debug, Clone, PartialEq)]
pub struct BenchCase {
    pub experiment: String,
    pub kernel: KernelSpec,
    pub noise_sigma: f64,
    pub occlusion: f64,
    pub seed: u64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct BenchRow {
    pub case: BenchCase,
    pub rmse_pre: f64,
    pub rmse_post: f64,
    pub iters: usize,
    pub seconds: f64,
}

impl BenchRow {
    /// One CSV line matching [`BENCH_CSV_HEADER`]. Without `timing` the
    /// seconds column is written as 0 so reruns are byte-identical.
    pub fn to_csv(&self, timing: bool) -> String {
        let c = &self.case;
        format!(
            "{},{},{},{},{},{},{},{},{},{}",
            c.experiment,
            c.kernel.family(),
            c.kernel.gamma(),
            c.noise_sigma,
            c.occlusion,
            c.seed,
            self.rmse_pre,
            self.rmse_post,
            self.iters,
            if timing { self.seconds } else { 0.0 }
        )
    }
}

/// Cartesian grid of cases, enumerated kernel-major then noise, occlusion
/// and seed.
#[derive(Debug, Clone, PartialEq)]
pub struct BenchGrid {
    pub experiment: String,
    pub kernels: Vec<KernelSpec>,
    pub noise: Vec<f64>,
    pub occlusion: Vec<f64>,
    pub seeds: Vec<u64>,
}

impl BenchGrid {
    /// Laplacian against Gaussian over noise `{0, .02, .04, .06}` and
    /// `gamma in {1, 2, 3}`.
    pub fn kernel_ablation(seeds: Vec<u64>) -> Self {
        let mut kernels = Vec::new();
        for family in [KernelFamily::Laplacian, KernelFamily::Gaussian] {
            for gamma in [1.0, 2.0, 3.0] {
                kernels.push(KernelSpec::new(family, gamma).expect("positive gamma"));
            }
        }
        Self {
            experiment: "kernel".into(),
            kernels,
            noise: vec![0.0, 0.02, 0.04, 0.06],
            occlusion: vec![0.0],
            seeds,
        }
    }

    pub fn noise(seeds: Vec<u64>) -> Self {
        Self {
            experiment: "noise".into(),
            kernels: vec![KernelSpec::default()],
            noise: vec![0.0, 0.01, 0.02, 0.03, 0.04, 0.05, 0.06],
            occlusion: vec![0.0],
            seeds,
        }
    }

    pub fn occlusion(seeds: Vec<u64>) -> Self {
        Self {
            experiment: "occlusion".into(),
            kernels: vec![KernelSpec::default()],
            noise: vec![0.0],
            occlusion: vec![0.0, 0.03, 0.1, 0.2],
            seeds,
        }
    }

    pub fn cases(&self) -> Vec<BenchCase> {
        let mut out = Vec::new();
        for &kernel in &self.kernels {
            for &noise_sigma in &self.noise {
                for &occlusion in &self.occlusion {
                    for &seed in &self.seeds {
                        out.push(BenchCase {
                            experiment: self.experiment.clone(),
                            kernel,
                            noise_sigma,
                            occlusion,
                            seed,
                        });
                    }
                }
            }
        }
        out
    }
}

/// Source/target pair derived from one base shape.
#[derive(Debug, Clone, PartialEq)]
pub struct SyntheticPair {
    pub source: PointSet,
    pub target: PointSet,
    /// `(source index, target index)` ground truth.
    pub truth: Correspondence,
}

/// The target is the [`synthetic_warp`] of `base`; the source is `base` with
/// noise added and a fraction of points removed. The three random streams are
/// derived from `seed`.
pub fn synthetic_pair(
    base: &PointSet,
    magnitude: f64,
    bandwidth: f64,
    noise_sigma: f64,
    occlusion: f64,
    seed: u64,
) -> Result<SyntheticPair> {
    let (target, _) = synthetic_warp(base, magnitude, bandwidth, seed)?;
    let noisy = add_noise(base, noise_sigma, seed.wrapping_add(NOISE_STREAM))?;
    let kept = occlude_indices(base.len(), occlusion, seed.wrapping_add(OCCLUSION_STREAM))?;
    let source = if kept.len() == base.len() { noisy } else { noisy.select(&kept)? };
    Ok(SyntheticPair {
        source,
        target,
        truth: Correspondence::given(kept.into_iter().enumerate().collect()),
    })
}

/// Runs one case on the normalized base shape with the default warp
/// bandwidth. RMSE uses the surviving ground-truth pairs.
pub fn run_case(
    base: &PointSet,
    case: &BenchCase,
    cfg: &RegistrationConfig,
    magnitude: f64,
) -> Result<BenchRow> {
    let base = normalize(base)?.with_norm(None);
    let pair = synthetic_pair(
        &base,
        magnitude,
        DEFAULT_WARP_BANDWIDTH,
        case.noise_sigma,
        case.occlusion,
        case.seed,
    )?;
    let cfg = RegistrationConfig {
        kernel: case.kernel,
        ..cfg.clone()
    };
    let rmse_pre = rmse(&pair.source, &pair.target, &pair.truth)?;
    let result = register(&pair.source, &pair.target, &cfg)?;
    Ok(BenchRow {
        case: case.clone(),
        rmse_pre,
        rmse_post: rmse(&result.deformed, &pair.target, &pair.truth)?,
        iters: result.iterations,
        seconds: result.wall_time,
    })
}
