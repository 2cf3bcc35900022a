use clap::Parser;

fn main() {
    if let Err(e) = sqac_cli::run(sqac_cli::Cli::parse()) {
        eprintln!("error: {e}");
        std::process::exit(1);
    }
}
