fn main() {
    std::process::exit(headline_rl::harness::cli::run(std::env::args_os()));
}
