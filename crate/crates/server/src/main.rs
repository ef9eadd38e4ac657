fn main() {
    std::process::exit(scriptorium_server::run_cli(std::env::args_os()));
}
