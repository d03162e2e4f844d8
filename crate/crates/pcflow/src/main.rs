use clap::Parser;

fn main() {
    let cli = pcflow::cli::Cli::parse();
    std::process::exit(pcflow::cli::main_with(cli));
}
