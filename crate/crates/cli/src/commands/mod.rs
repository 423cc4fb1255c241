mod evaluate;
mod fetch;
mod predict;
mod prepare;
mod train;

use anyhow::Result;

use crate::args::Command;

pub fn execute(command: Command) -> Result<()> {
    match command {
        Command::Fetch(args) => fetch::run(args),
        Command::Prepare(args) => prepare::run(args),
        Command::Train(args) => train::run(args),
        Command::Evaluate(args) => evaluate::run(args),
        Command::Predict(args) => predict::run(args),
    }
}
