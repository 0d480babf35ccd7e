fn main() {
    std::process::exit(csm_cli::main_with_args(std::env::args_os()));
}
