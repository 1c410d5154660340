fn main() {
    std::process::exit(lptlab::cli_runner::main_with_args(std::env::args_os()));
}
