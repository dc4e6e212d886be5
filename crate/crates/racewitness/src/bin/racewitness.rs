fn main() {
    std::process::exit(racewitness::cli::main());
}
