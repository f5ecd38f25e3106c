fn main() {
    std::process::exit(dhi_core::cli::main_with_args(std::env::args_os()));
}
