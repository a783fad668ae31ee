fn main() {
    std::process::exit(tubeid::cli::main_with(std::env::args_os()));
}
