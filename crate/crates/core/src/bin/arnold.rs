fn main() {
    arnold::cli::init_logging();
    std::process::exit(arnold::cli::run(std::env::args_os()));
}
