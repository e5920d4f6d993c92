fn main() {
    std::process::exit(eigenmarket_cli::run(std::env::args_os()));
}
