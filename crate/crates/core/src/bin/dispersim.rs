fn main() {
    std::process::exit(dispersion::cli::main_with(std::env::args_os()));
}
