fn main() {
    std::process::exit(vmsim::cli::main());
}
