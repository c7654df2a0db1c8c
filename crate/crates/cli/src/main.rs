fn main() {
    std::process::exit(timflow_cli::run(std::env::args_os()));
}
