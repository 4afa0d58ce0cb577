fn main() {
    std::process::exit(pdbench_cli::run(std::env::args_os()));
}
