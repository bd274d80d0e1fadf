fn main() {
    std::process::exit(levicool::cli::run(std::env::args_os()));
}
