//! Noise and occlusion sweeps on the fish fixture, printed as CSV.
//!
//! cargo run --release --example robustness_bench > fish.csv

use clusterreg::eval::{fixtures, run_case, BenchGrid, BENCH_CSV_HEADER};
use clusterreg::RegistrationConfig;

fn main() -> clusterreg::Result<()> {
    let base = fixtures::fish(400);
    let cfg = RegistrationConfig::default();
    println!("{BENCH_CSV_HEADER}");
    for grid in [BenchGrid::noise(vec![0, 1]), BenchGrid::occlusion(vec![0, 1])] {
        for case in grid.cases() {
            let row = run_case(&base, &case, &cfg, 0.3)?;
            println!("{}", row.to_csv(true));
        }
    }
    Ok(())
}
