fn main() {
    std::process::exit(autogst::cli::main_with_args(std::env::args_os()));
}
