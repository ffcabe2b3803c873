fn main() {
    std::process::exit(chnu_cli::run_command(std::env::args_os()));
}
