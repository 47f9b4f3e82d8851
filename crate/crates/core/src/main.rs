use clap::Parser;

fn main() {
    let cli = nhdirac::cli::Cli::parse();
    std::process::exit(nhdirac::cli::execute(cli));
}
