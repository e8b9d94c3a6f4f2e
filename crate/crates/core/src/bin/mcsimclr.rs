fn main() {
    std::process::exit(mcsimclr::cli::cli_main(std::env::args_os()));
}
