use std::process::ExitCode;

use clap::{Parser, Subcommand};

mod cmd;
mod common;
mod manifest;
mod overrides;

use common::UsageError;

/// Recurrent networks with element-wise attention gates.
#[derive(Debug, Parser)]
#[command(name = "eleatt", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Generate a distractor-task dataset.
    Gen(cmd::gen::Args),
    /// Train a network; extra `--model.* v` / `--train.* v` flags override config keys.
    Train(cmd::train::Args),
    /// Evaluate a checkpoint on a dataset split.
    Eval(cmd::eval::Args),
    /// Compare BPTT gradients with finite differences.
    Gradcheck(cmd::gradcheck::Args),
    /// Parameter and FLOP counts of a network configuration.
    Cost(cmd::cost::Args),
    /// Dump first-layer attention responses of a trained model.
    Attn(cmd::attn::Args),
    /// Paired training runs of gated and ungated variants.
    Bench(cmd::bench::Args),
}

fn run() -> anyhow::Result<()> {
    let (args, dotted) = overrides::split_args(std::env::args_os())?;
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => e.exit(),
    };
    if !dotted.is_empty() && !matches!(cli.command, Command::Train(_)) {
        return Err(UsageError::new("`--model.*` / `--train.*` overrides are only accepted by `train`").into());
    }
    match cli.command {
        Command::Gen(a) => cmd::gen::run(a),
        Command::Train(a) => cmd::train::run(a, dotted),
        Command::Eval(a) => cmd::eval::run(a),
        Command::Gradcheck(a) => cmd::gradcheck::run(a),
        Command::Cost(a) => cmd::cost::run(a),
        Command::Attn(a) => cmd::attn::run(a),
        Command::Bench(a) => cmd::bench::run(a),
    }
}

/// Stdout closed early (e.g. piped into `head`): stop quietly instead of
/// printing a panic.
fn quiet_broken_pipe() {
    let default = std::panic::take_hook();
    std::panic::set_hook(Box::new(move |info| {
        let msg = info
            .payload()
            .downcast_ref::<String>()
            .map(String::as_str)
            .unwrap_or_default();
        if msg.contains("Broken pipe") {
            std::process::exit(1);
        }
        default(info)
    }));
}

fn main() -> ExitCode {
    quiet_broken_pipe();
    match run() {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(common::exit_code(&e))
        }
    }
}
