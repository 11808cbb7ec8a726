use clap::Parser;

fn main() {
    let cli = pvreg_cli::Cli::parse();
    if let Err(e) = pvreg_cli::run(cli) {
        eprintln!("pvreg: {e}");
        std::process::exit(e.exit_code());
    }
}
