fn main() {
    std::process::exit(starcyl::cli::main_with_args(std::env::args_os()));
}
