fn main() {
    std::process::exit(viaqual::cli::run(std::env::args_os()));
}
