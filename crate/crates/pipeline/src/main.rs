fn main() {
    std::process::exit(spacegen::cli::run(std::env::args_os()));
}
