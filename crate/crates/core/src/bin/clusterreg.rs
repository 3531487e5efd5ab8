fn main() {
    std::process::exit(clusterreg::cli::run(std::env::args_os()));
}
