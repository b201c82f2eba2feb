fn main() {
    std::process::exit(evospike::cli::main_with_args(std::env::args_os()));
}
