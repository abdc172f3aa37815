fn main() {
    std::process::exit(splatkit::cli::main_with_args(std::env::args_os()));
}
