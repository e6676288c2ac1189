fn main() {
    std::process::exit(ambench::cli::main_with(std::env::args_os()));
}
