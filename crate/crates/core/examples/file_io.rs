//! Writes a sphere in every supported format, reads it back, and registers
//! a file pair the way the `register` subcommand does.

use clusterreg::eval::{fixtures, rmse, synthetic_pair, Correspondence, DEFAULT_WARP_BANDWIDTH};
use clusterreg::io::{read_points, write_points, FileFormat};
use clusterreg::{register, RegistrationConfig};

fn main() -> clusterreg::Result<()> {
    let dir = std::env::temp_dir().join(format!("clusterreg-io-{}", std::process::id()));
    std::fs::create_dir_all(&dir).map_err(|e| clusterreg::Error::io(&dir, e))?;

    let pair = synthetic_pair(&fixtures::sphere(400), 0.2, DEFAULT_WARP_BANDWIDTH, 0.0, 0.0, 3)?;
    for name in ["source.xyz", "source.csv", "source.ply"] {
        let path = dir.join(name);
        write_points(&pair.source, &path, None)?;
        let back = read_points(&path, None)?;
        println!("{name:<11} {:?} {} points, exact: {}", FileFormat::from_path(&path)?, back.len(), back == pair.source);
    }

    write_points(&pair.target, dir.join("target.ply"), None)?;
    let source = read_points(dir.join("source.csv"), None)?;
    let target = read_points(dir.join("target.ply"), None)?;
    let result = register(&source, &target, &RegistrationConfig::default())?;
    write_points(&result.deformed, dir.join("deformed.xyz"), None)?;
    let truth = Correspondence::ground_truth(source.len());
    println!(
        "registered: rmse {:.4} -> {:.4}, output in {}",
        rmse(&source, &target, &truth)?,
        rmse(&result.deformed, &target, &truth)?,
        dir.display()
    );
    Ok(())
}
