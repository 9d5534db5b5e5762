fn main() {
    std::process::exit(zelo::cli::main_entry());
}
