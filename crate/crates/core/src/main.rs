fn main() {
    std::process::exit(driftid::cli::run(std::env::args_os()));
}
