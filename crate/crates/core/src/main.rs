fn main() {
    std::process::exit(boost_ipi::cli::run_from_env());
}
