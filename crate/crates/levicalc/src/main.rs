use clap::Parser;

fn main() {
    let cli = levicalc::cli::Cli::parse();
    std::process::exit(levicalc::cli::run(cli));
}
