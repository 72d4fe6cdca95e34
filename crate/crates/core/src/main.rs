fn main() {
    std::process::exit(qcomm::cli::run(std::env::args_os()));
}
