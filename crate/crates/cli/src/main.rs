fn main() {
    std::process::exit(nsdyn_cli::run_command(std::env::args_os().skip(1)));
}
