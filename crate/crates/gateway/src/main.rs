fn main() {
    std::process::exit(changescope_gateway::cli::main());
}
