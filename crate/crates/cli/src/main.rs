mod args;
mod commands;
mod config;
mod failure;

use clap::Parser;
use std::process::ExitCode;
use zoneseg::taxonomy::TaxonomyRegistry;

use args::{Cli, Command};
use failure::{Classify, Failure};

fn registry(files: &[std::path::PathBuf]) -> Result<TaxonomyRegistry, Failure> {
    let mut registry = TaxonomyRegistry::builtin();
    for path in files {
        let t = registry.load_file(path).usage()?;
        log::info!("loaded taxonomy {} ({} zones) from {}", t.name(), t.len(), path.display());
    }
    Ok(registry)
}

fn run(cli: &Cli) -> Result<(), Failure> {
    log::info!(
        "{} config: {}",
        cli.command.name(),
        serde_json::to_string(cli).expect("config serializes")
    );
    let registry = registry(&cli.taxonomy_files)?;
    match &cli.command {
        Command::Train(a) => commands::train(a, &registry),
        Command::Predict(a) => commands::predict(a, &registry),
        Command::Evaluate(a) => commands::evaluate(a, &registry),
        Command::Agreement(a) => commands::agreement(a, &registry),
        Command::Encode(a) => commands::encode(a, &registry),
        Command::Synth(a) => commands::synth(a, &registry),
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::new().filter_or("ZONESEG_LOG", "info"))
        .format_timestamp(None)
        .init();

    let env_config = std::env::var_os("ZONESEG_CONFIG").map(Into::into);
    let argv = match config::expand(std::env::args_os().collect(), env_config) {
        Ok(argv) => argv,
        Err(msg) => {
            eprintln!("error: {msg}");
            return ExitCode::from(2);
        }
    };
    let cli = match Cli::try_parse_from(argv) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(e.exit_code() as u8);
        }
    };
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            log::error!("{f}");
            f.exit_code()
        }
    }
}
