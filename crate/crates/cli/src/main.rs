fn main() {
    std::process::exit(gfvc_cli::run(std::env::args_os()));
}
