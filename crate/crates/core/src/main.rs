fn main() {
    std::process::exit(adaptive_conformal::cli::main_with_args(std::env::args_os()));
}
