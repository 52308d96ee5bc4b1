fn main() {
    std::process::exit(dres::cli::main_with_args(std::env::args_os()));
}
