fn main() {
    std::process::exit(smoothlang::cli::main());
}
