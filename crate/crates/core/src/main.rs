fn main() {
    std::process::exit(herglotz::cli::main_with_args(std::env::args_os()));
}
