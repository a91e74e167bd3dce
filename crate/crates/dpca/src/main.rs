fn main() {
    let argv: Vec<String> = std::env::args().collect();
    std::process::exit(dpca::harness::cli_main(&argv));
}
