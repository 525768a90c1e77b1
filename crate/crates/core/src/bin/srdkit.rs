fn main() {
    std::process::exit(srdkit::cli::run());
}
