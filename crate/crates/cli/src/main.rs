fn main() {
    std::process::exit(kgm_cli::main_with_args(std::env::args_os()));
}
