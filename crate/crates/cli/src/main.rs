fn main() {
    std::process::exit(lowrisk_cli::main_with_args(std::env::args_os()));
}
