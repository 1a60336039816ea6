//! Command-line driver: argument parsing, output staging and the command
//! implementations behind the `ssp` binary.

pub mod args;
pub mod commands;
pub mod error;
pub mod output;

use std::path::PathBuf;

use args::{Cli, Command};
use commands::Paths;
use error::Result;

/// Runs one parsed command and returns its output directory.
pub fn run(cli: &Cli) -> Result<PathBuf> {
    let paths = Paths {
        root: cli.output_root.clone(),
    };
    match &cli.command {
        Command::Synth(a) => commands::synth(a, &paths),
        Command::Preprocess(a) => commands::preprocess_cmd(a, &paths),
        Command::Train(a) => commands::train(a, &paths),
        Command::Eval(a) => commands::eval(a, &paths),
        Command::Ablate(a) => commands::ablate(a, &paths),
        Command::Proxemics(a) => commands::proxemics(a, &paths),
        Command::Heatmap(a) => commands::heatmap(a, &paths),
        Command::Gradcheck(a) => commands::gradcheck(a, &paths),
    }
}
