fn main() {
    std::process::exit(physpretrain::cli::run(std::env::args_os()));
}
