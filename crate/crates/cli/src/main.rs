fn main() {
    std::process::exit(nearfield_cli::cli::main_with(std::env::args_os()));
}
