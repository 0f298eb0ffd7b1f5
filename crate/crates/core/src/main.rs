fn main() {
    std::process::exit(contagion::cli::run_command(std::env::args_os()));
}
