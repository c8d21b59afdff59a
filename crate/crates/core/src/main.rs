use clap::Parser;
use signflow::cli::Cli;

fn main() -> std::process::ExitCode {
    Cli::parse().execute()
}
