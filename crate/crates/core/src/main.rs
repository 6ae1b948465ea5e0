fn main() {
    std::process::exit(diststat::cli::run(std::env::args_os()));
}
