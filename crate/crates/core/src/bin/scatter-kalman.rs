fn main() {
    std::process::exit(scatter_kalman::cli::main_with_args(std::env::args_os()));
}
