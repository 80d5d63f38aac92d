fn main() {
    std::process::exit(nls4_cli::cli::main_with_args(std::env::args_os()));
}
