//! Gram approximation error for clustered versus uniformly sampled landmarks,
//! together with the quantization-based error bound.

use clusterreg::eval::fixtures;
use clusterreg::nystrom::{approximation_error, audit_factor, build_nystrom, build_nystrom_random};
use clusterreg::KernelSpec;

fn main() -> clusterreg::Result<()> {
    let spec = KernelSpec::default();
    let pts = fixtures::ring(800);
    println!("ratio  landmarks  eps_clustered  eps_random       bound");
    for ratio in [0.02, 0.05, 0.1, 0.2, 0.4] {
        let clustered = build_nystrom(&spec, &pts, ratio, 0)?;
        let report = audit_factor(&spec, &pts, &clustered)?;
        let random = build_nystrom_random(&spec, &pts, ratio, 0)?;
        println!(
            "{ratio:<5}  {:>9}  {:>13.4}  {:>10.4}  {:>10.3e}",
            report.landmarks,
            report.epsilon,
            approximation_error(&spec, &pts, &random)?,
            report.bound
        );
    }
    Ok(())
}
