use clap::Parser;

fn main() {
    let cli = bwsgd_cli::Cli::parse();
    if let Err(e) = bwsgd_cli::run(cli) {
        eprintln!("error: {e:#}");
        std::process::exit(1);
    }
}
