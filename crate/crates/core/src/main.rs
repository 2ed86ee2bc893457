fn main() {
    std::process::exit(areaflux::cli::main_from_args(std::env::args_os()));
}
