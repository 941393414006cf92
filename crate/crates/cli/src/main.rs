fn main() {
    std::process::exit(hdselect_cli::main_with_args(std::env::args_os()));
}
