fn main() {
    std::process::exit(ringlab::cli::main_with_args(std::env::args_os()));
}
