use clap::Parser;

fn main() {
    let cli = gridcell::cli::Cli::parse();
    std::process::exit(gridcell::cli::run(cli));
}
