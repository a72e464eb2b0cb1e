use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use noisysgd_cli::config::{ExperimentConfig, ExperimentKind};
use noisysgd_cli::mnist::run_mnist;
use noisysgd_cli::plot::{plot_files, PlotKind};
use noisysgd_cli::runner::{run_experiment, ArmResult};
use noisysgd_cli::verify::{load_defaults, verify, ThmOverrides};
use noisysgd_cli::{CliError, CliResult};

#[derive(Parser)]
#[command(name = "noisysgd", version, about = "Label-noise SGD experiments on small ReLU networks")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Train a single run (one arm, one run).
    Train(RunArgs),
    /// Train every run of every noise level and write summary.csv.
    Sweep(RunArgs),
    /// Ten-class sweep plus dead-neuron census and digit association.
    Mnist(RunArgs),
    /// Check a theorem: thm1, thm2, thm3, thm4, ap-exact or decay-rate.
    Verify {
        id: String,
        /// Per-theorem defaults (JSON); the shipped defaults otherwise.
        #[arg(long)]
        config: Option<PathBuf>,
        /// Directory for report.txt and report.json.
        #[arg(long)]
        out: Option<PathBuf>,
        #[command(flatten)]
        overrides: ThmOverrides,
    },
    /// Line plot of metrics.csv or summary.csv files as SVG.
    Plot {
        #[arg(required = true)]
        csv: Vec<PathBuf>,
        #[arg(long, value_enum, default_value = "norm")]
        kind: PlotKind,
        #[arg(long)]
        out: PathBuf,
    },
}

#[derive(Args)]
struct RunArgs {
    #[arg(long)]
    config: PathBuf,
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    runs: Option<usize>,
    #[arg(long)]
    parallel: Option<usize>,
}

impl RunArgs {
    fn resolve(&self, kind: ExperimentKind) -> CliResult<(ExperimentConfig, PathBuf)> {
        let mut cfg = ExperimentConfig::load(&self.config)?;
        if let Some(k) = cfg.experiment {
            if k != kind {
                return Err(CliError::Config(format!(
                    "config is for {k:?}, not {kind:?}"
                )));
            }
        }
        cfg.seed = self.seed.unwrap_or(cfg.seed);
        cfg.runs = self.runs.unwrap_or(cfg.runs);
        cfg.parallel = self.parallel.unwrap_or(cfg.parallel);
        let out = self
            .out
            .clone()
            .or_else(|| cfg.out.clone())
            .ok_or_else(|| CliError::Config("no output directory: pass --out or set out".into()))?;
        Ok((cfg, out))
    }
}

fn report_runs(arms: &[ArmResult]) {
    for a in arms {
        for (r, res) in a.runs.iter().enumerate() {
            let m = res.last_metrics();
            let opt = |v: Option<f64>| v.map_or("-".to_string(), |v| format!("{v:.4}"));
            println!(
                "{} run {r}: {} steps, norm {:.4}, active {}, test error {} ({:.1?})",
                a.arm.label,
                res.steps,
                m.total_weight_norm(),
                opt(m.active_test.or(m.active_train)),
                opt(m.err_test),
                res.wall_time
            );
        }
    }
}

fn write(path: &Path, text: &str) -> CliResult<()> {
    std::fs::write(path, text).map_err(|e| CliError::Run(format!("{}: {e}", path.display())))
}

fn run(cli: Cli) -> CliResult<bool> {
    match cli.command {
        Command::Train(args) => {
            let (cfg, out) = args.resolve(ExperimentKind::Train)?;
            if cfg.runs != 1 || cfg.p.len() > 1 {
                return Err(CliError::Config("train takes one run of one arm; use sweep".into()));
            }
            report_runs(&run_experiment(&cfg, &out)?);
        }
        Command::Sweep(args) => {
            let (cfg, out) = args.resolve(ExperimentKind::Sweep)?;
            report_runs(&run_experiment(&cfg, &out)?);
        }
        Command::Mnist(args) => {
            let (cfg, out) = args.resolve(ExperimentKind::Mnist)?;
            for c in run_mnist(&cfg, &out)? {
                println!(
                    "{} run {}: active fraction {:.4}, dead {}/{}, digit-associated {}",
                    c.arm,
                    c.run,
                    c.active_fraction,
                    c.dead.len(),
                    c.hidden,
                    c.table.associated_count()
                );
            }
        }
        Command::Verify {
            id,
            config,
            out,
            overrides,
        } => {
            let defaults = load_defaults(config.as_deref())?;
            let v = verify(&id, overrides, &defaults)?;
            let text = format!("{}{}", v.report, v.extra);
            print!("{text}");
            if let Some(dir) = out {
                std::fs::create_dir_all(&dir).map_err(|e| CliError::Run(format!("{}: {e}", dir.display())))?;
                write(&dir.join("report.txt"), &text)?;
                write(&dir.join("report.json"), &(v.report.to_json() + "\n"))?;
            }
            return Ok(v.report.passed());
        }
        Command::Plot { csv, kind, out } => plot_files(&csv, kind, &out)?,
    }
    Ok(true)
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
