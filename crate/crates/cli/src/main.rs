fn main() {
    std::process::exit(friedrichs_cli::run(std::env::args_os()));
}
