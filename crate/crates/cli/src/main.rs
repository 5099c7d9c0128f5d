use clap::Parser;

fn main() {
    std::process::exit(kgscatter_cli::run(kgscatter_cli::Cli::parse()));
}
