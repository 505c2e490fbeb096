fn main() {
    std::process::exit(arim::cli::main_with_args(std::env::args_os()));
}
