fn main() {
    std::process::exit(bernband::cli::main_with_env());
}
