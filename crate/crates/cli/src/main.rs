mod args;
mod commands;
mod run_manifest;

use std::process::ExitCode;

use clap::{CommandFactory, FromArgMatches};

use args::{Cli, Command};

fn version() -> String {
    format!(
        "{} (graph bundle format {}, checkpoint format {})",
        env!("CARGO_PKG_VERSION"),
        kgx_core::kgraph::BUNDLE_VERSION,
        kgx_core::model::CHECKPOINT_VERSION
    )
}

fn run(cli: &Cli) -> kgx_core::Result<()> {
    match &cli.command {
        Command::Build(a) => commands::build(a),
        Command::Train(a) => commands::train_cmd(a),
        Command::Predict(a) => commands::predict(a),
        Command::Explain(a) => commands::explain(a),
        Command::Evaluate(a) => commands::evaluate(a),
        Command::ExplainEval(a) => commands::explain_eval(a),
        Command::ExportEmbeddings(a) => commands::export(a),
        Command::Synth(a) => commands::synth(a),
    }
}

fn main() -> ExitCode {
    let matches = Cli::command().version(version()).get_matches();
    let cli = match Cli::from_arg_matches(&matches) {
        Ok(c) => c,
        Err(e) => e.exit(),
    };
    let level = match cli.verbose {
        0 => "warn",
        1 => "info",
        _ => "debug",
    };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level))
        .format_timestamp(None)
        .init();
    if let Some(n) = cli.threads {
        if n == 0 {
            eprintln!("error: --threads must be at least 1");
            return ExitCode::from(2);
        }
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(n).build_global() {
            eprintln!("error: cannot start thread pool: {e}");
            return ExitCode::from(1);
        }
    }
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(if e.is_input_error() { 2 } else { 1 })
        }
    }
}
