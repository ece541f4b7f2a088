fn main() {
    std::process::exit(hdgc_cli::run(std::env::args_os()));
}
