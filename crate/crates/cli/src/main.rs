use clap::Parser;

fn main() {
    let cli = sls_cli::Cli::parse();
    std::process::exit(sls_cli::run(&cli));
}
