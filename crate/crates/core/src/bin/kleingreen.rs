fn main() {
    std::process::exit(kleingreen::cli::run(std::env::args_os()));
}
