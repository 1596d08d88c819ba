fn main() {
    std::process::exit(gestalt_core::cli::run(std::env::args_os()));
}
