fn main() {
    std::process::exit(radial_calderon::cli::run(std::env::args_os()));
}
