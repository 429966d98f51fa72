fn main() {
    std::process::exit(forcedflow::cli::main_with_args(std::env::args_os()));
}
