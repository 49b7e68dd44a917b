fn main() {
    std::process::exit(iblab::cli::main_with_args(std::env::args_os()));
}
