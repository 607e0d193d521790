fn main() {
    std::process::exit(pullin_cli::run_cli(std::env::args_os()));
}
