fn main() {
    std::process::exit(bsdb::cli::main());
}
