fn main() {
    std::process::exit(sqgate::cli::main_with_args(std::env::args_os()));
}
