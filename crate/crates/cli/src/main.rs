fn main() {
    std::process::exit(causal_simt_cli::run(std::env::args_os()));
}
