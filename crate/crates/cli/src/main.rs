fn main() {
    std::process::exit(sewave_cli::main_with(std::env::args_os()));
}
