fn main() {
    std::process::exit(lapsvm_cli::run(std::env::args_os()));
}
