fn main() {
    std::process::exit(spinparity::cli::run());
}
