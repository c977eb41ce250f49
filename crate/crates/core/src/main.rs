fn main() {
    std::process::exit(granulate::cli::run(std::env::args_os()));
}
