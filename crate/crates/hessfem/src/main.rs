fn main() {
    std::process::exit(hessfem::cli::main_with_args(std::env::args_os()));
}
