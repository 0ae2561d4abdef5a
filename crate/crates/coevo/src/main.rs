fn main() {
    std::process::exit(coevo::cli::main_entry(std::env::args_os()));
}
