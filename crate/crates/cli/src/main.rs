mod args;
mod commands;
mod resolve;

use clap::error::ErrorKind;
use clap::Parser;

use exprstage::error::Error;

use args::{Cli, Command};

/// 1 = usage (bad flags or config), 2 = data problems, 3 = numerical failure.
fn exit_code(err: &Error) -> i32 {
    if err.is_numerical() {
        return 3;
    }
    match err {
        Error::Config(_)
        | Error::Json(_)
        | Error::InvalidParameter { .. }
        | Error::InvalidFolds { .. }
        | Error::EmptyGrid
        | Error::InvalidFraction(_) => 1,
        _ => 2,
    }
}

fn run(cli: &Cli) -> exprstage::error::Result<()> {
    match &cli.command {
        Command::Validate(a) => commands::run_validate(a),
        Command::Deg(a) => commands::run_deg(a),
        Command::Select(a) => commands::run_select(a),
        Command::Transform(a) => commands::run_transform(a),
        Command::Augment(a) => commands::run_augment(a),
        Command::Train(a) => commands::run_train(a),
        Command::Predict(a) => commands::run_predict(a),
        Command::Grid(a) => commands::run_grid(a),
        Command::Evaluate(a) => commands::run_evaluate(a),
        Command::Cv(a) => commands::run_cv(a),
        Command::Trials(a) => commands::run_trials(a),
        Command::Pipeline(a) => commands::run_pipeline(a),
    }
}

fn main() {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => 0,
                _ => 1,
            };
            // clap renders help to stdout and errors to stderr on its own
            let _ = e.print();
            std::process::exit(code);
        }
    };
    if let Err(err) = run(&cli) {
        eprintln!("error: {err}");
        let mut source = std::error::Error::source(&err);
        while let Some(s) = source {
            eprintln!("  caused by: {s}");
            source = s.source();
        }
        std::process::exit(exit_code(&err));
    }
}
