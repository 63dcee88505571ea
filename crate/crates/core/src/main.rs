fn main() {
    if let Err(e) = facegame::cli::main() {
        eprintln!("error: {e}");
        std::process::exit(1);
    }
}
