fn main() {
    std::process::exit(fibcode::cli::run(std::env::args_os()));
}
