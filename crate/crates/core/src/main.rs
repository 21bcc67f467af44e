fn main() {
    std::process::exit(deltanabla::cli::main_with_args(std::env::args_os()));
}
