fn main() {
    std::process::exit(impscore::cli::main());
}
