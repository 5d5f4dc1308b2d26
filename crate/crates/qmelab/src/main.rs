use std::process::ExitCode;

use clap::Parser;
use qmelab::Cli;

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::new().filter_or("QMELAB_LOG", "warn")).init();
    let cli = Cli::parse();
    ExitCode::from(qmelab::run(&cli))
}
