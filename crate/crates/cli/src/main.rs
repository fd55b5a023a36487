fn main() {
    std::process::exit(regkit_cli::run(std::env::args_os()));
}
