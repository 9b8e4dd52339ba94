fn main() {
    std::process::exit(cocycle_lab::cli::main());
}
