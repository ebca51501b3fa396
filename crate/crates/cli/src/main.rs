fn main() {
    std::process::exit(coopnet_cli::run(std::env::args_os()));
}
