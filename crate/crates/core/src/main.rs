fn main() {
    std::process::exit(aerodeploy::cli::run(std::env::args_os()));
}
