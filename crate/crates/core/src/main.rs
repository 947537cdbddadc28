fn main() {
    std::process::exit(f2m::cli::run(std::env::args_os()));
}
