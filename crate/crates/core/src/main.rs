fn main() {
    std::process::exit(robustdtw::cli::run(std::env::args_os()));
}
