fn main() {
    std::process::exit(qcdma::cli::run(std::env::args_os()));
}
