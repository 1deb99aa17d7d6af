fn main() {
    std::process::exit(mobile_ude::cli::main_with_args(std::env::args_os()));
}
