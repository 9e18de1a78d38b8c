fn main() {
    // Command wiring lands with the io module.
    eprintln!("riskset: not yet wired");
    std::process::exit(1);
}
