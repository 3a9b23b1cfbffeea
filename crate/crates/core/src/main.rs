fn main() {
    std::process::exit(sciscore::cli::run(std::env::args_os()));
}
