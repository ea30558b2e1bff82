fn main() {
    let code = roboprep_cli::run(std::env::args().skip(1));
    std::process::exit(code);
}
