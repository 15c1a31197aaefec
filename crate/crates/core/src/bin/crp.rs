fn main() {
    std::process::exit(crp_core::cli::run());
}
