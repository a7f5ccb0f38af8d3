use clap::Parser;

fn main() -> anyhow::Result<()> {
    airbubble_service::cli::Cli::parse().run()
}
