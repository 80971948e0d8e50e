use std::process::ExitCode;

use clap::Parser;

mod args;
mod commands;
mod error;

use args::{Cli, Command};

fn init_threads() {
    if let Some(n) = std::env::var("PICM_THREADS")
        .ok()
        .and_then(|v| v.parse::<usize>().ok())
    {
        if n > 0 {
            // Fails only if a pool already exists, which cannot happen here.
            let _ = rayon::ThreadPoolBuilder::new()
                .num_threads(n)
                .build_global();
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    init_threads();
    let result = match cli.command {
        Command::Gen(a) => commands::gen(a),
        Command::Encode(a) => commands::encode(a),
        Command::Decode(a) => commands::decode(a),
        Command::Priority(a) => commands::priority(a),
        Command::RateCurve(a) => commands::rate_curve(a),
        Command::FilterTrain(a) => commands::filter_train(a),
        Command::Adaptive(a) => commands::adaptive(a),
        Command::Ece(a) => commands::ece(a),
        Command::Bd(a) => commands::bd(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("picm: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
