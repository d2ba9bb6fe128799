fn main() {
    std::process::exit(driftstream_cli::run_cli(std::env::args_os()));
}
