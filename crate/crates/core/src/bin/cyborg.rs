fn main() {
    std::process::exit(cyborg::cli::main_with_args(std::env::args_os()));
}
