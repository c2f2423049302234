use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use pvshare_core::config::ConfigLayer;
use pvshare_core::pipeline::{self, PipelineError};

/// Exact PV-sharing schedules for an islanded residential microgrid.
#[derive(Parser, Debug)]
#[command(name = "pvshare", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Solve every selected day under every selected strategy and write reports.
    Run(RunArgs),
}

#[derive(Args, Debug)]
struct RunArgs {
    /// `key = value` config file; flags below override its values.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Canonical long-form CSV.
    #[arg(long)]
    data: Option<PathBuf>,
    /// Comma-separated house ids.
    #[arg(long)]
    houses: Option<String>,
    #[arg(long)]
    start: Option<String>,
    #[arg(long)]
    end: Option<String>,
    /// Comma-separated subset of A,B,C,A+,B+,C+,SELF.
    #[arg(long, alias = "strategies")]
    strategy: Option<String>,
    #[arg(long)]
    min_up: Option<String>,
    #[arg(long)]
    min_down: Option<String>,
    #[arg(long)]
    weight_scale: Option<String>,
    /// Use the min up/down inequalities with their printed signs.
    #[arg(long)]
    literal_updown_signs: bool,
    #[arg(long)]
    max_seconds: Option<String>,
    #[arg(long)]
    max_nodes: Option<String>,
    /// `sweep` (default) or `lp`.
    #[arg(long)]
    engine: Option<String>,
    /// Worker threads; 0 uses every core.
    #[arg(long)]
    jobs: Option<String>,
    /// Cross-check small programs against exhaustive enumeration.
    #[arg(long)]
    oracle_check: bool,
    #[arg(long)]
    out: Option<PathBuf>,
}

impl RunArgs {
    fn layer(self) -> ConfigLayer {
        let flag = |on: bool| on.then(|| "true".to_string());
        ConfigLayer {
            data: self.data,
            houses: self.houses,
            start: self.start,
            end: self.end,
            strategies: self.strategy,
            min_up: self.min_up,
            min_down: self.min_down,
            weight_scale: self.weight_scale,
            literal_updown_signs: flag(self.literal_updown_signs),
            steps_per_day: None,
            max_nodes: self.max_nodes,
            max_seconds: self.max_seconds,
            engine: self.engine,
            oracle_check: flag(self.oracle_check),
            jobs: self.jobs,
            out: self.out,
        }
    }
}

fn run(args: RunArgs) -> Result<(), PipelineError> {
    let base = match &args.config {
        Some(path) => ConfigLayer::from_file(path)?,
        None => ConfigLayer::default(),
    };
    let cfg = base.overlay(args.layer()).resolve()?;
    let report = pipeline::run(&cfg)?;
    let unsolved = report
        .outcomes
        .iter()
        .filter(|o| !o.result.is_solved())
        .count();
    println!(
        "{} days, {} schedules ({} unsolved), reports in {}",
        report.days,
        report.outcomes.len(),
        unsolved,
        cfg.out_dir.display()
    );
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    let Command::Run(args) = cli.command;
    match run(args) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
