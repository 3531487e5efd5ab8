//! Warps a ring with a smooth random field and registers the original back
//! onto it.
//!
//! cargo run --release --example register_warp -- [points] [seed]

use clusterreg::eval::{fixtures, nearest_neighbor_pairs, rmse, synthetic_pair, DEFAULT_WARP_BANDWIDTH};
use clusterreg::{register, RegistrationConfig};

fn main() -> clusterreg::Result<()> {
    let mut args = std::env::args().skip(1);
    let points: usize = args.next().map_or(500, |a| a.parse().expect("points"));
    let seed: u64 = args.next().map_or(0, |a| a.parse().expect("seed"));

    let pair = synthetic_pair(&fixtures::ring(points), 0.3, DEFAULT_WARP_BANDWIDTH, 0.0, 0.0, seed)?;
    let cfg = RegistrationConfig::default();
    let result = register(&pair.source, &pair.target, &cfg)?;

    let pre = rmse(&pair.source, &pair.target, &pair.truth)?;
    let post = rmse(&result.deformed, &pair.target, &pair.truth)?;
    let nn = nearest_neighbor_pairs(&result.deformed, &pair.target)?;
    println!("points      {points}");
    println!("landmarks   {:?}", result.landmarks);
    println!("iterations  {} (converged: {})", result.iterations, result.converged);
    println!("sigma2      {:.3e}", result.final_sigma2());
    println!("rmse pre    {pre:.4}");
    println!("rmse post   {post:.4}  (true correspondence)");
    println!("rmse nn     {:.4}  (nearest neighbour)", rmse(&result.deformed, &pair.target, &nn)?);
    for (k, s) in result.sigma2_trace.iter().enumerate().take(10) {
        println!("  iter {k:>2}  sigma2 {s:.3e}");
    }
    Ok(())
}
