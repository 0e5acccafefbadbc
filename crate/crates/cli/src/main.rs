fn main() {
    std::process::exit(audit_cli::main_with_args(std::env::args_os()));
}
