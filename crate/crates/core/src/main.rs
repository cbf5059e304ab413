fn main() {
    std::process::exit(isac_lab::cli::run(std::env::args_os()));
}
