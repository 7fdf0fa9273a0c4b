fn main() {
    std::process::exit(iflux::cli::run(std::env::args_os()));
}
