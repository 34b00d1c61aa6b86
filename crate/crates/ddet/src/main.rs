fn main() {
    std::process::exit(ddet::cli::run(std::env::args_os()));
}
