fn main() {
    std::process::exit(qwiener::cli::run(std::env::args_os()));
}
