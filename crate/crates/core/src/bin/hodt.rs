fn main() {
    std::process::exit(hodt::cli::main_with_args(std::env::args_os()));
}
