fn main() {
    std::process::exit(trackfit::cli::run(std::env::args_os()));
}
