fn main() {
    std::process::exit(tdschedule::harness::cli::cli_main(std::env::args_os()));
}
