fn main() {
    std::process::exit(foveate::cli::main_with(std::env::args_os()));
}
