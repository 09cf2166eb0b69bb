fn main() {
    std::process::exit(carrier_ranging::cli::cli_main(std::env::args_os()));
}
