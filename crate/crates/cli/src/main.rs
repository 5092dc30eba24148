fn main() {
    let argv: Vec<String> = std::env::args().collect();
    std::process::exit(sglab_cli::main_entry(&argv));
}
