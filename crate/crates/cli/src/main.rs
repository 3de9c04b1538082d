fn main() {
    std::process::exit(eaqec_cli::run(std::env::args_os()));
}
