fn main() {
    std::process::exit(gaudin_forge::cli::main_with_args(std::env::args_os()));
}
