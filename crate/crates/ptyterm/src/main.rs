fn main() {
    std::process::exit(ptyterm::cli::run());
}
