fn main() {
    std::process::exit(infoplane_cli::run(std::env::args_os()));
}
