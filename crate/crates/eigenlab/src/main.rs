use clap::Parser;

fn main() -> std::process::ExitCode {
    let cli = eigenlab::cli::Cli::parse();
    std::process::ExitCode::from(eigenlab::cli::run(&cli))
}
