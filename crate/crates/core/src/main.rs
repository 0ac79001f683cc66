fn main() {
    std::process::exit(fhnreg::cli::main_with_args(std::env::args_os()));
}
