fn main() {
    std::process::exit(evaluator_outliers::cli::main_with_args(std::env::args_os()));
}
