fn main() {
    std::process::exit(delayflock::cli::run(std::env::args_os()));
}
