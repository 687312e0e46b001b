fn main() {
    std::process::exit(ecl_core::cli::main_with_args(std::env::args_os()));
}
