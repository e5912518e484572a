fn main() {
    std::process::exit(nergrvt_cli::main_with_args(std::env::args_os()));
}
