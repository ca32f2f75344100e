fn main() {
    std::process::exit(gaborcnn::cli::run(std::env::args_os()));
}
