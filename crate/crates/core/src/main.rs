fn main() {
    std::process::exit(rawsea::cli::run(std::env::args_os()));
}
