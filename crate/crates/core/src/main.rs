fn main() {
    std::process::exit(finops_agent::cli::run(std::env::args_os()));
}
