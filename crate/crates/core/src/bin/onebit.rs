fn main() {
    std::process::exit(onebit_gcs::harness::cli::run(std::env::args_os()));
}
