fn main() {
    std::process::exit(discrete_conformal::cli::run(std::env::args_os()));
}
