fn main() {
    std::process::exit(pointmorph::cli::cli_main(std::env::args_os()));
}
