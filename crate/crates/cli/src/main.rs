fn main() {
    std::process::exit(purify_cli::run(std::env::args_os()));
}
