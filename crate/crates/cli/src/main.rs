fn main() {
    std::process::exit(terminators::cli::main_with(std::env::args_os()));
}
