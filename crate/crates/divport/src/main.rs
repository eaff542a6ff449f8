fn main() {
    std::process::exit(divport::cli::run(std::env::args_os()));
}
