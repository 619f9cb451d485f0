fn main() {
    std::process::exit(panostage_cli::app::run(std::env::args_os()));
}
