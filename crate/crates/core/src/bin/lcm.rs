fn main() {
    std::process::exit(lcm_pmrf::cli::main());
}
