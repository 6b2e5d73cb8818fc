fn main() {
    std::process::exit(battbayes_cli::main_exit_code());
}
