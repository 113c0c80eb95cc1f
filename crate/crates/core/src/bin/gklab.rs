fn main() {
    std::process::exit(gklab::cli::main());
}
