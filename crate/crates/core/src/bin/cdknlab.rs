fn main() {
    std::process::exit(cdknlab::cli::main_with_args(std::env::args_os()));
}
