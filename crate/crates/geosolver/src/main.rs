fn main() {
    std::process::exit(geosolver::cli::run(std::env::args_os()));
}
