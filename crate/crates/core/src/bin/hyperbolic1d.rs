fn main() {
    std::process::exit(hyperbolic1d::cli::run(std::env::args_os()));
}
