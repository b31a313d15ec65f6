fn main() {
    std::process::exit(cattr_harness::cli::main_with(std::env::args_os()));
}
