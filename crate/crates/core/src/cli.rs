//! Command-line front end. The binary only forwards to [`run`].

use std::ffi::OsString;
use std::fmt::Write as _;
use std::fs;
use std::io::Write as _;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};

use crate::config::RegistrationConfig;
use crate::error::{Error, Result};
use crate::eval::{
    self, fixtures, nearest_neighbor_pairs, rmse, BenchGrid, Correspondence, BENCH_CSV_HEADER,
};
use crate::io::{read_pairs, read_points, write_pairs, write_points, FileFormat};
use crate::kernel::{KernelFamily, KernelSpec};
use crate::kmeans::kmeans_elkan;
use crate::nystrom::{audit_factor, build_nystrom, build_nystrom_random, approximation_error};
use crate::points::{normalize, PointSet};
use crate::solver::register;

pub const EXIT_OK: i32 = 0;
pub const EXIT_USAGE: i32 = 2;
pub const EXIT_IO: i32 = 3;
pub const EXIT_FORMAT: i32 = 4;
pub const EXIT_INPUT: i32 = 5;
pub const EXIT_NUMERIC: i32 = 6;

const EXIT_CODES_HELP: &str = "\
Exit codes:
  0  success (a run that hits --max-iters still succeeds)
  2  invalid command line
  3  file could not be read or written
  4  malformed file or unsupported format
  5  invalid input data or parameters
  6  numerical failure (singular system)";

#[derive(Debug, Parser)]
#[command(
    name = "clusterreg",
    version,
    about = "Non-rigid point set registration by entropy-regularized fuzzy clustering",
    after_help = EXIT_CODES_HELP
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Deform SOURCE toward TARGET and write the deformed source.
    Register(RegisterArgs),
    /// Generate a warped source/target pair with ground-truth pairing.
    Synth(SynthArgs),
    /// RMSE between a deformed set and a target.
    Eval(EvalArgs),
    /// Elkan k-means clustering of a point set.
    Kmeans(KmeansArgs),
    /// Compare clustered and random Nyström landmarks against the error bound.
    NystromAudit(AuditArgs),
    /// Run a robustness grid on a synthetic fixture and emit CSV.
    Bench(BenchArgs),
}

/// Registration parameters. Unset flags fall back to `--config`, then to the
/// library defaults.
#[derive(Debug, Clone, Default, Args)]
pub struct SolverFlags {
    /// Entropy weight [default: 0.5]
    #[arg(long)]
    pub lambda: Option<f64>,
    /// Smoothness weight [default: 0.1]
    #[arg(long)]
    pub zeta: Option<f64>,
    /// Kernel bandwidth [default: 2]
    #[arg(long)]
    pub gamma: Option<f64>,
    /// Kernel family [default: laplacian]
    #[arg(long, value_enum)]
    pub kernel: Option<KernelArg>,
    /// Nyström landmark ratio in (0, 1]; 1 uses the exact Gram matrix [default: 0.3]
    #[arg(long)]
    pub ratio: Option<f64>,
    /// Iteration cap [default: 100]
    #[arg(long)]
    pub max_iters: Option<usize>,
    /// Relative sigma^2 change that stops the loop [default: 1e-5]
    #[arg(long)]
    pub tol: Option<f64>,
    /// Seed for landmark clustering and synthetic data [default: 0]
    #[arg(long)]
    pub seed: Option<u64>,
    /// File of `key=value` lines (lambda, zeta, gamma, kernel, ratio, max_iters, tol, seed)
    #[arg(long)]
    pub config: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum KernelArg {
    Laplacian,
    Gaussian,
}

impl From<KernelArg> for KernelFamily {
    fn from(k: KernelArg) -> Self {
        match k {
            KernelArg::Laplacian => KernelFamily::Laplacian,
            KernelArg::Gaussian => KernelFamily::Gaussian,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum FormatArg {
    Xyz,
    Csv,
    Ply,
}

impl From<FormatArg> for FileFormat {
    fn from(f: FormatArg) -> Self {
        match f {
            FormatArg::Xyz => FileFormat::Xyz,
            FormatArg::Csv => FileFormat::Csv,
            FormatArg::Ply => FileFormat::PlyAscii,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum ShapeArg {
    Ring,
    Grid,
    Sphere,
    Fish,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum ExperimentArg {
    Kernel,
    Noise,
    Occlusion,
}

#[derive(Debug, Args)]
pub struct RegisterArgs {
    pub source: PathBuf,
    pub target: PathBuf,
    /// Where to write the deformed source
    #[arg(short, long)]
    pub output: PathBuf,
    /// File format override for all files
    #[arg(long, value_enum)]
    pub format: Option<FormatArg>,
    /// Pairing file (`i j` per line) for the reported RMSE
    #[arg(long, conflicts_with = "nn")]
    pub pairs: Option<PathBuf>,
    /// Report RMSE under nearest-neighbor pairing
    #[arg(long)]
    pub nn: bool,
    #[command(flatten)]
    pub solver: SolverFlags,
}

#[derive(Debug, Args)]
pub struct SynthArgs {
    /// Built-in base shape
    #[arg(long, value_enum, default_value = "ring", conflicts_with = "base")]
    pub shape: ShapeArg,
    /// Base shape read from a file instead of a built-in one; it is normalized
    /// first, so all outputs are in its normalized frame
    #[arg(long)]
    pub base: Option<PathBuf>,
    /// Number of points of the built-in shape (grid: rounded down to a square)
    #[arg(long, default_value_t = 500)]
    pub points: usize,
    /// Largest displacement of the warp, in normalized units
    #[arg(long, default_value_t = 0.3)]
    pub magnitude: f64,
    /// Width of the warp's Gaussian bumps
    #[arg(long, default_value_t = eval::DEFAULT_WARP_BANDWIDTH)]
    pub bandwidth: f64,
    /// Gaussian noise added to the source
    #[arg(long, default_value_t = 0.0)]
    pub noise: f64,
    /// Fraction of source points removed
    #[arg(long, default_value_t = 0.0)]
    pub occlusion: f64,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long)]
    pub source_out: PathBuf,
    #[arg(long)]
    pub target_out: PathBuf,
    /// Ground-truth pairing output (`source target` per line)
    #[arg(long)]
    pub pairs_out: Option<PathBuf>,
    #[arg(long, value_enum)]
    pub format: Option<FormatArg>,
}

#[derive(Debug, Args)]
pub struct EvalArgs {
    pub deformed: PathBuf,
    pub target: PathBuf,
    /// Pairing file; without it and without --nn, index identity is used
    #[arg(long, conflicts_with = "nn")]
    pub pairs: Option<PathBuf>,
    #[arg(long)]
    pub nn: bool,
    #[arg(long, value_enum)]
    pub format: Option<FormatArg>,
}

#[derive(Debug, Args)]
pub struct KmeansArgs {
    pub input: PathBuf,
    #[arg(short)]
    pub k: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, default_value_t = crate::kmeans::DEFAULT_MAX_ITERS)]
    pub max_iters: usize,
    /// Write the centroids here
    #[arg(long)]
    pub centroids: Option<PathBuf>,
    #[arg(long, value_enum)]
    pub format: Option<FormatArg>,
}

#[derive(Debug, Args)]
pub struct AuditArgs {
    pub input: PathBuf,
    #[arg(long, value_delimiter = ',', default_values_t = vec![0.02, 0.1, 0.2, 0.4])]
    pub ratios: Vec<f64>,
    /// Number of seeds, run as 0..N
    #[arg(long, default_value_t = 10)]
    pub seeds: u64,
    #[arg(long, default_value_t = 2.0)]
    pub gamma: f64,
    /// CSV destination; standard output when absent
    #[arg(short, long)]
    pub output: Option<PathBuf>,
    /// Record wall-clock seconds (otherwise 0, keeping output reproducible)
    #[arg(long)]
    pub timing: bool,
    #[arg(long, value_enum)]
    pub format: Option<FormatArg>,
}

#[derive(Debug, Args)]
pub struct BenchArgs {
    #[arg(long, value_enum, default_value = "kernel")]
    pub experiment: ExperimentArg,
    #[arg(long, value_enum, default_value = "ring", conflicts_with = "base")]
    pub shape: ShapeArg,
    /// Base shape read from a file instead of a built-in one
    #[arg(long)]
    pub base: Option<PathBuf>,
    #[arg(long, default_value_t = 500)]
    pub points: usize,
    /// Number of seeds, run as 0..N
    #[arg(long, default_value_t = 5)]
    pub seeds: u64,
    #[arg(long, default_value_t = 0.3)]
    pub magnitude: f64,
    /// Restrict the noise grid to these values
    #[arg(long, value_delimiter = ',')]
    pub noise: Option<Vec<f64>>,
    /// Restrict the occlusion grid to these values
    #[arg(long, value_delimiter = ',')]
    pub occlusion: Option<Vec<f64>>,
    /// Restrict the kernel grid to these bandwidths
    #[arg(long = "gammas", value_delimiter = ',')]
    pub gammas: Option<Vec<f64>>,
    /// CSV destination; standard output when absent
    #[arg(short, long)]
    pub output: Option<PathBuf>,
    /// Record wall-clock seconds (otherwise 0, keeping output reproducible)
    #[arg(long)]
    pub timing: bool,
    #[arg(long, value_enum)]
    pub format: Option<FormatArg>,
    #[command(flatten)]
    pub solver: SolverFlags,
}

/// Exit code for a library error.
pub fn exit_code(err: &Error) -> i32 {
    match err {
        Error::Io { .. } => EXIT_IO,
        Error::Parse { .. }
        | Error::MixedDimensions { .. }
        | Error::UnsupportedFormat(_)
        | Error::UnsupportedDimension { .. } => EXIT_FORMAT,
        Error::SingularSystem(_) => EXIT_NUMERIC,
        Error::DegenerateInput(_)
        | Error::DimensionMismatch { .. }
        | Error::InvalidParameter(_)
        | Error::InvalidK { .. }
        | Error::UnsupportedKernel(_)
        | Error::EmptyCorrespondence
        | Error::InvalidCorrespondence(_) => EXIT_INPUT,
    }
}

/// Parses `args` (including the program name), runs the command, and returns
/// the process exit code. Messages go to standard output and error.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { EXIT_USAGE } else { EXIT_OK };
        }
    };
    let mut stdout = std::io::stdout().lock();
    match execute(cli.command, &mut stdout) {
        Ok(()) => EXIT_OK,
        Err(e) => {
            eprintln!("error: {e}");
            exit_code(&e)
        }
    }
}

/// Runs a parsed command, writing its report to `out`.
pub fn execute(command: Command, out: &mut dyn std::io::Write) -> Result<()> {
    let text = match command {
        Command::Register(a) => cmd_register(&a)?,
        Command::Synth(a) => cmd_synth(&a)?,
        Command::Eval(a) => cmd_eval(&a)?,
        Command::Kmeans(a) => cmd_kmeans(&a)?,
        Command::NystromAudit(a) => cmd_nystrom_audit(&a)?,
        Command::Bench(a) => cmd_bench(&a)?,
    };
    out.write_all(text.as_bytes())
        .and_then(|_| out.flush())
        .map_err(|e| Error::io("<stdout>", e))
}

fn parse_value<V: std::str::FromStr>(path: &Path, line: usize, key: &str, v: &str) -> Result<V> {
    v.parse().map_err(|_| Error::Parse {
        path: path.into(),
        line,
        message: format!("invalid value '{v}' for {key}"),
    })
}

/// Applies a `key=value` file onto `cfg`. Blank lines and `#` comments are
/// ignored; unknown keys are errors.
pub fn apply_config_file(cfg: &mut RegistrationConfig, path: &Path) -> Result<()> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let mut family = cfg.kernel.family();
    let mut gamma = cfg.kernel.gamma();
    for (idx, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let lineno = idx + 1;
        let (key, value) = line.split_once('=').ok_or_else(|| Error::Parse {
            path: path.into(),
            line: lineno,
            message: format!("expected key=value, found '{line}'"),
        })?;
        let (key, value) = (key.trim().replace('-', "_"), value.trim());
        match key.as_str() {
            "lambda" => cfg.lambda = parse_value(path, lineno, &key, value)?,
            "zeta" => cfg.zeta = parse_value(path, lineno, &key, value)?,
            "gamma" => gamma = parse_value(path, lineno, &key, value)?,
            "kernel" => family = parse_value(path, lineno, &key, value)?,
            "ratio" | "approx_ratio" => cfg.approx_ratio = parse_value(path, lineno, &key, value)?,
            "max_iters" => cfg.max_iters = parse_value(path, lineno, &key, value)?,
            "tol" => cfg.tol = parse_value(path, lineno, &key, value)?,
            "seed" => cfg.seed = parse_value(path, lineno, &key, value)?,
            _ => {
                return Err(Error::Parse {
                    path: path.into(),
                    line: lineno,
                    message: format!("unknown key '{key}'"),
                })
            }
        }
    }
    cfg.kernel = KernelSpec::new(family, gamma)?;
    Ok(())
}

impl SolverFlags {
    /// Defaults, then the config file, then explicit flags.
    pub fn resolve(&self) -> Result<RegistrationConfig> {
        let mut cfg = RegistrationConfig::default();
        if let Some(path) = &self.config {
            apply_config_file(&mut cfg, path)?;
        }
        if let Some(v) = self.lambda {
            cfg.lambda = v;
        }
        if let Some(v) = self.zeta {
            cfg.zeta = v;
        }
        if let Some(v) = self.ratio {
            cfg.approx_ratio = v;
        }
        if let Some(v) = self.max_iters {
            cfg.max_iters = v;
        }
        if let Some(v) = self.tol {
            cfg.tol = v;
        }
        if let Some(v) = self.seed {
            cfg.seed = v;
        }
        let family = self.kernel.map_or(cfg.kernel.family(), Into::into);
        cfg.kernel = KernelSpec::new(family, self.gamma.unwrap_or(cfg.kernel.gamma()))?;
        cfg.validate()?;
        Ok(cfg)
    }
}

fn format_of(f: Option<FormatArg>) -> Option<FileFormat> {
    f.map(Into::into)
}

fn pairing(
    deformed: &PointSet,
    target: &PointSet,
    pairs: Option<&Vec<(usize, usize)>>,
    nn: bool,
) -> Result<Correspondence> {
    match (pairs, nn) {
        (Some(p), _) => Ok(Correspondence::given(p.clone())),
        (None, true) => nearest_neighbor_pairs(deformed, target),
        (None, false) if deformed.len() == target.len() => Ok(Correspondence::ground_truth(deformed.len())),
        (None, false) => nearest_neighbor_pairs(deformed, target),
    }
}

fn cmd_register(a: &RegisterArgs) -> Result<String> {
    let cfg = a.solver.resolve()?;
    let format = format_of(a.format);
    let source = read_points(&a.source, format)?;
    let target = read_points(&a.target, format)?;
    let pairs = a.pairs.as_ref().map(read_pairs).transpose()?;

    let result = register(&source, &target, &cfg)?;
    write_points(&result.deformed, &a.output, format)?;

    let pre = rmse(&source, &target, &pairing(&source, &target, pairs.as_ref(), a.nn)?)?;
    let post = rmse(
        &result.deformed,
        &target,
        &pairing(&result.deformed, &target, pairs.as_ref(), a.nn)?,
    )?;
    Ok(format!(
        "rmse_pre={pre} rmse_post={post} iters={} sigma2={} seconds={}\n",
        result.iterations,
        result.final_sigma2(),
        result.wall_time
    ))
}

fn builtin_shape(shape: ShapeArg, points: usize) -> Result<PointSet> {
    if points < 2 {
        return Err(Error::InvalidParameter(format!("need at least 2 points, got {points}")));
    }
    Ok(match shape {
        ShapeArg::Ring => fixtures::ring(points),
        ShapeArg::Sphere => fixtures::sphere(points),
        ShapeArg::Fish => fixtures::fish(points),
        ShapeArg::Grid => {
            let side = (points as f64).sqrt().floor() as usize;
            fixtures::grid(side, side)
        }
    })
}

fn base_shape(file: Option<&PathBuf>, shape: ShapeArg, points: usize, format: Option<FileFormat>) -> Result<PointSet> {
    match file {
        Some(path) => read_points(path, format),
        None => builtin_shape(shape, points),
    }
}

fn cmd_synth(a: &SynthArgs) -> Result<String> {
    let format = format_of(a.format);
    let base = match &a.base {
        Some(path) => normalize(&read_points(path, format)?)?.with_norm(None),
        None => builtin_shape(a.shape, a.points)?,
    };
    let pair = eval::synthetic_pair(&base, a.magnitude, a.bandwidth, a.noise, a.occlusion, a.seed)?;
    write_points(&pair.source, &a.source_out, format)?;
    write_points(&pair.target, &a.target_out, format)?;
    if let Some(path) = &a.pairs_out {
        write_pairs(pair.truth.pairs(), path)?;
    }
    Ok(format!("source={} target={}\n", pair.source.len(), pair.target.len()))
}

fn cmd_eval(a: &EvalArgs) -> Result<String> {
    let format = format_of(a.format);
    let deformed = read_points(&a.deformed, format)?;
    let target = read_points(&a.target, format)?;
    let pairs = a.pairs.as_ref().map(read_pairs).transpose()?;
    let corr = pairing(&deformed, &target, pairs.as_ref(), a.nn)?;
    Ok(format!("rmse={}\n", rmse(&deformed, &target, &corr)?))
}

fn cmd_kmeans(a: &KmeansArgs) -> Result<String> {
    let format = format_of(a.format);
    let pts = read_points(&a.input, format)?;
    let r = kmeans_elkan(&pts, a.k, a.seed, a.max_iters)?;
    if let Some(path) = &a.centroids {
        write_points(&r.centroids, path, format)?;
    }
    Ok(format!(
        "q={} T={} iterations={} converged={}\n",
        r.quantization_error, r.max_cluster_size, r.iterations, r.converged
    ))
}

fn emit(text: String, output: Option<&PathBuf>) -> Result<String> {
    match output {
        Some(path) => {
            let mut f = fs::File::create(path).map_err(|e| Error::io(path, e))?;
            f.write_all(text.as_bytes()).map_err(|e| Error::io(path, e))?;
            Ok(String::new())
        }
        None => Ok(text),
    }
}

fn cmd_nystrom_audit(a: &AuditArgs) -> Result<String> {
    let source = read_points(&a.input, format_of(a.format))?;
    let spec = KernelSpec::laplacian(a.gamma)?;
    let mut csv = String::from("ratio,seed,landmarks,epsilon_clustered,epsilon_random,bound,slack,seconds\n");
    for &ratio in &a.ratios {
        for seed in 0..a.seeds {
            let start = std::time::Instant::now();
            let clustered = build_nystrom(&spec, &source, ratio, seed)?;
            let report = audit_factor(&spec, &source, &clustered)?;
            let random = build_nystrom_random(&spec, &source, ratio, seed)?;
            let eps_random = approximation_error(&spec, &source, &random)?;
            let seconds = if a.timing { start.elapsed().as_secs_f64() } else { 0.0 };
            let _ = writeln!(
                csv,
                "{ratio},{seed},{},{},{eps_random},{},{},{seconds}",
                report.landmarks, report.epsilon, report.bound, report.slack
            );
        }
    }
    emit(csv, a.output.as_ref())
}

fn cmd_bench(a: &BenchArgs) -> Result<String> {
    let cfg = a.solver.resolve()?;
    let base = base_shape(a.base.as_ref(), a.shape, a.points, format_of(a.format))?;
    let seeds: Vec<u64> = (0..a.seeds).collect();
    let mut grid = match a.experiment {
        ExperimentArg::Kernel => BenchGrid::kernel_ablation(seeds),
        ExperimentArg::Noise => BenchGrid::noise(seeds),
        ExperimentArg::Occlusion => BenchGrid::occlusion(seeds),
    };
    if let Some(v) = &a.noise {
        grid.noise = v.clone();
    }
    if let Some(v) = &a.occlusion {
        grid.occlusion = v.clone();
    }
    match (a.experiment, &a.gammas) {
        (ExperimentArg::Kernel, Some(gammas)) => {
            let mut kernels = Vec::new();
            for family in [KernelFamily::Laplacian, KernelFamily::Gaussian] {
                for &g in gammas {
                    kernels.push(KernelSpec::new(family, g)?);
                }
            }
            grid.kernels = kernels;
        }
        // Single-kernel grids follow the solver flags.
        (ExperimentArg::Noise | ExperimentArg::Occlusion, _) => grid.kernels = vec![cfg.kernel],
        _ => {}
    }
    let mut csv = String::from(BENCH_CSV_HEADER);
    csv.push('\n');
    for case in grid.cases() {
        let row = eval::run_case(&base, &case, &cfg, a.magnitude)?;
        csv.push_str(&row.to_csv(a.timing));
        csv.push('\n');
    }
    emit(csv, a.output.as_ref())
}
