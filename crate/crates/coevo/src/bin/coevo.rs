fn main() {
    std::process::exit(coevo::cli::cli_main(std::env::args()));
}
