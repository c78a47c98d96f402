fn main() {
    std::process::exit(binq4_cli::run(std::env::args_os()));
}
