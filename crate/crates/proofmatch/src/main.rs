fn main() {
    std::process::exit(proofmatch::cli::main_impl());
}
