fn main() {
    std::process::exit(desknav::cli::main_with_args(std::env::args_os()));
}
