fn main() {
    std::process::exit(newsgraph_cli::run(std::env::args_os()));
}
