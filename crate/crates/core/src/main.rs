use std::path::PathBuf;
use std::process::ExitCode;

use biaslab::experiment::{self, ExperimentConfig};
use biaslab::{Error, Result};
use clap::{Args, Parser, Subcommand};

/// Output root override, below `--out` and above the config file.
const OUT_ENV: &str = "BIASLAB_OUT";

#[derive(Parser)]
#[command(name = "biaslab", version, about = "Estimation-bias lab for deterministic policy-gradient critics")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Train every seed and write run logs, checkpoints and manifests.
    Train(RunArgs),
    /// Train with interleaved bias measurement and write bias tables.
    Bias(RunArgs),
    /// Tabulate analytic expected target errors against Monte Carlo estimates.
    ClosedForm(CommonArgs),
    /// Summarize final evaluation returns per rule.
    Compare {
        #[command(flatten)]
        common: CommonArgs,
        /// Result roots laid out as <root>/<rule>/<seed>/run_log.csv; defaults to the output root.
        runs: Vec<PathBuf>,
    },
}

#[derive(Args)]
struct CommonArgs {
    /// JSON experiment configuration.
    #[arg(long, conflicts_with = "preset")]
    config: Option<PathBuf>,
    /// Shipped configuration: ddpg, td3, wd3, tadd, tcd3 or swtd3.
    #[arg(long)]
    preset: Option<String>,
    /// Output root.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct RunArgs {
    #[command(flatten)]
    common: CommonArgs,
    /// Run only this seed.
    #[arg(long)]
    seed: Option<u64>,
}

impl CommonArgs {
    fn load(&self) -> Result<ExperimentConfig> {
        match (&self.config, &self.preset) {
            (Some(path), _) => ExperimentConfig::load(path),
            (None, Some(name)) => ExperimentConfig::preset(name),
            (None, None) => Ok(ExperimentConfig::default()),
        }
    }

    fn out_root(&self, cfg: &ExperimentConfig) -> PathBuf {
        self.out
            .clone()
            .or_else(|| std::env::var_os(OUT_ENV).map(PathBuf::from))
            .unwrap_or_else(|| cfg.output_dir.clone())
    }
}

impl RunArgs {
    fn load(&self) -> Result<(ExperimentConfig, PathBuf)> {
        if self.common.config.is_none() && self.common.preset.is_none() {
            return Err(Error::Config("pass --config <file> or --preset <name>".into()));
        }
        let mut cfg = self.common.load()?;
        if let Some(seed) = self.seed {
            cfg.seeds = vec![seed];
        }
        cfg.validate()?;
        let root = self.common.out_root(&cfg);
        Ok((cfg, root))
    }
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Train(args) => {
            let (cfg, root) = args.load()?;
            for dir in experiment::cmd_train(&cfg, &root)? {
                println!("{}", dir.display());
            }
        }
        Command::Bias(args) => {
            let (cfg, root) = args.load()?;
            for path in experiment::cmd_bias(&cfg, &root)? {
                println!("{}", path.display());
            }
        }
        Command::ClosedForm(args) => {
            let cfg = args.load()?;
            println!("{}", experiment::cmd_closed_form(&cfg, &args.out_root(&cfg))?.display());
        }
        Command::Compare { common, runs } => {
            let cfg = common.load()?;
            let root = common.out_root(&cfg);
            let runs = if runs.is_empty() { vec![root.clone()] } else { runs };
            let rows = experiment::cmd_compare(&runs, &root)?;
            print!("{}", experiment::render_table(&rows));
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("biaslab: {e}");
            ExitCode::from(if e.is_config_error() { 2 } else { 1 })
        }
    }
}
