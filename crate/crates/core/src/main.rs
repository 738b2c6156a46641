fn main() {
    ciregions::cli::configure_threads();
    std::process::exit(ciregions::cli::run(std::env::args_os()));
}
