fn main() {
    std::process::exit(ptspectra::cli::run(std::env::args_os()));
}
