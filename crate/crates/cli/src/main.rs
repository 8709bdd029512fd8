fn main() {
    std::process::exit(psnci_cli::run(std::env::args_os()));
}
