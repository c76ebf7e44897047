fn main() {
    std::process::exit(roadside_cli::run(std::env::args_os()));
}
