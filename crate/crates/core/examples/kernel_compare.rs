//! Laplacian versus Gaussian displacement kernels on the same warped ring,
//! across bandwidths and noise levels.

use clusterreg::eval::{fixtures, run_case, BenchGrid};
use clusterreg::RegistrationConfig;
use std::collections::BTreeMap;

fn main() -> clusterreg::Result<()> {
    let base = fixtures::ring(300);
    let cfg = RegistrationConfig::default();
    let mut sums: BTreeMap<String, (f64, usize)> = BTreeMap::new();
    for case in BenchGrid::kernel_ablation(vec![0, 1, 2]).cases() {
        let row = run_case(&base, &case, &cfg, 0.3)?;
        let key = format!("{} gamma={} noise={}", case.kernel.family(), case.kernel.gamma(), case.noise_sigma);
        let e = sums.entry(key).or_default();
        e.0 += row.rmse_post;
        e.1 += 1;
    }
    for (key, (sum, n)) in sums {
        println!("{key:<36} mean rmse_post {:.4}", sum / n as f64);
    }
    Ok(())
}
