fn main() {
    std::process::exit(aerobridge::cli::run(std::env::args_os()));
}
