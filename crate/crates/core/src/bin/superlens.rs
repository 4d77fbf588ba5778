fn main() {
    std::process::exit(superlens::cli::main_with_args(std::env::args_os()));
}
