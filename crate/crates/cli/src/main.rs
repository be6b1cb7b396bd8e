use std::path::{Path, PathBuf};
use std::process::ExitCode;

use bubblelab::experiment::{analyze, Experiment, ExperimentConfig, Outcome, Preset};
use bubblelab::{Error, Field, Functional};
use clap::{Args, Parser, Subcommand};

/// Sacks–Uhlenbeck and biharmonic bubbling experiments.
#[derive(Parser)]
#[command(name = "bubblelab", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run a preset experiment and write its artifacts.
    Run(Common),
    /// Re-run bubble analysis on a stored field.
    Analyze {
        /// Field written by a previous run (`field.bin`).
        field: PathBuf,
        #[command(flatten)]
        common: Common,
    },
    /// Run the geodesic sweepout min-max experiment.
    Minmax(Common),
}

#[derive(Args)]
struct Common {
    /// Experiment config (TOML).
    #[arg(long)]
    config: Option<PathBuf>,
    /// Output directory; defaults to the config's `out` or `out/<preset>`.
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    /// Overrides the config's preset.
    #[arg(long)]
    preset: Option<String>,
}

impl Common {
    fn load(&self, fallback: Option<Preset>) -> Result<(Experiment, PathBuf), Error> {
        let mut cfg = match &self.config {
            Some(p) => ExperimentConfig::load(p)?,
            None => ExperimentConfig::default(),
        };
        if let Some(p) = &self.preset {
            cfg.preset = Some(p.parse()?);
        }
        if cfg.preset.is_none() {
            cfg.preset = fallback;
        }
        if let Some(s) = self.seed {
            cfg.seed = Some(s);
        }
        let exp = cfg.resolve()?;
        let out = self
            .out
            .clone()
            .or(cfg.out.clone())
            .unwrap_or_else(|| Path::new("out").join(exp.preset.name()));
        Ok((exp, out))
    }
}

fn run(cli: Cli) -> Result<Outcome, Error> {
    match cli.command {
        Command::Run(c) => {
            let (exp, out) = c.load(None)?;
            exp.run(&out)
        }
        Command::Minmax(c) => {
            let (exp, out) = c.load(Some(Preset::GeodesicSweepout))?;
            if exp.preset != Preset::GeodesicSweepout {
                return Err(Error::InvalidParameter(format!(
                    "minmax runs the geodesic-sweepout preset, not {}",
                    exp.preset.name()
                )));
            }
            exp.run(&out)
        }
        Command::Analyze { field, common } => {
            let (exp, out) = common.load(Some(Preset::Degree1Torus))?;
            let u = Field::load(&field)?;
            let last = *exp
                .schedule
                .last()
                .ok_or_else(|| Error::InvalidParameter("empty schedule".into()))?;
            let f = match exp.preset {
                Preset::BiharmonicDegree1 => Functional::biharmonic(last)?,
                _ => Functional::alpha(last)?,
            };
            let (bubbles, ledger) = analyze(&u, &f, &exp.analysis, exp.max_bubbles, &out)?;
            println!(
                "{} bubble(s); total {:.6}, bubbles {:.6}, neck {:.6}, body {:.6}",
                bubbles.len(),
                ledger.total,
                ledger.bubbles,
                ledger.neck,
                ledger.body
            );
            Ok(Outcome::Complete)
        }
    }
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(Outcome::Complete) => ExitCode::SUCCESS,
        Ok(Outcome::Partial(e)) => {
            eprintln!("stage failure, partial results written: {e}");
            ExitCode::from(2)
        }
        Err(e @ Error::Config { .. }) => {
            eprintln!("config error: {e}");
            ExitCode::from(1)
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(1)
        }
    }
}
