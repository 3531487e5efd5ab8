//! Elkan k-means against the plain Lloyd reference on a fish outline.
//! Both must agree exactly; Elkan should do far fewer distance evaluations.

use clusterreg::eval::fixtures;
use clusterreg::kmeans::{kmeans_elkan, kmeans_lloyd_reference};

fn main() -> clusterreg::Result<()> {
    let pts = fixtures::fish(2000);
    println!("{:>4} {:>12} {:>12} {:>10} {:>6} same", "k", "elkan_dist", "lloyd_dist", "q", "T");
    for k in [10, 50, 200, 600] {
        let e = kmeans_elkan(&pts, k, 0, 100)?;
        let l = kmeans_lloyd_reference(&pts, k, 0, 100)?;
        println!(
            "{k:>4} {:>12} {:>12} {:>10.4} {:>6} {}",
            e.distance_evaluations,
            l.distance_evaluations,
            e.quantization_error,
            e.max_cluster_size,
            e.assignment == l.assignment
        );
    }
    Ok(())
}
