fn main() {
    std::process::exit(portrait_cli::run(std::env::args_os()));
}
