use clap::Parser;

fn main() {
    let cli = streameval_cli::Cli::parse();
    std::process::exit(streameval_cli::dispatch(cli));
}
