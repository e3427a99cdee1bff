fn main() {
    std::process::exit(cleanlist::cli::run(std::env::args_os()));
}
