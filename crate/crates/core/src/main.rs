use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use echo_lab::harness::config::ExperimentConfig;
use echo_lab::harness::csv::Table;
use echo_lab::harness::run::{plot_csv, run_experiment};
use echo_lab::metrics::fit_exp_rate;

#[derive(Parser)]
#[command(name = "echo-lab", version, about = "Run echo experiments and post-process their curves")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the experiment described by a config file.
    Run {
        config: PathBuf,
        /// Override a config value, `key=value`. May be repeated.
        #[arg(long = "set", value_name = "KEY=VALUE")]
        set: Vec<String>,
    },
    /// Fit an exponential rate to one column of a CSV file.
    Fit {
        csv: PathBuf,
        #[arg(long)]
        col: String,
        /// Fit window `t1:t2` in units of the first column.
        #[arg(long)]
        window: String,
        /// Truncate the fit where the series falls below 3x this value.
        #[arg(long)]
        saturation: Option<f64>,
    },
    /// Render a CSV file as a log-y SVG plot next to it.
    Plot { csv: PathBuf },
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(2)
        }
    }
}

fn run(cli: Cli) -> echo_lab::Result<ExitCode> {
    match cli.command {
        Command::Run { config, set } => {
            let cfg = ExperimentConfig::load(&config, &set)?;
            let report = run_experiment(&cfg)?;
            print!("{}", report.to_text());
            println!("output = {}", report.run_dir.display());
            Ok(if report.all_passed() { ExitCode::SUCCESS } else { ExitCode::FAILURE })
        }
        Command::Fit { csv, col, window, saturation } => {
            let table = Table::read(&csv)?;
            let (a, b) = window
                .split_once(':')
                .ok_or_else(|| echo_lab::Error::Config(format!("window `{window}` is not t1:t2")))?;
            let parse = |s: &str| {
                s.trim().parse::<f64>().map_err(|_| echo_lab::Error::Config(format!("bad window bound `{s}`")))
            };
            let y = table
                .column(&col)
                .ok_or_else(|| echo_lab::Error::Config(format!("no column `{col}` in {}", csv.display())))?;
            let fit = fit_exp_rate(&table.columns[0], y, (parse(a)?, parse(b)?), saturation)?;
            print!("{}", fit.report(&format!("fit.{col}")));
            Ok(ExitCode::SUCCESS)
        }
        Command::Plot { csv } => {
            let out = plot_csv(&csv)?;
            println!("{}", out.display());
            Ok(ExitCode::SUCCESS)
        }
    }
}
