//! Runs every arm of an experiment and writes the per-run and summary files.
//!
//! Layout under the output directory:
//!
//! ```text
//! config.json                      resolved experiment config
//! summary.csv                      per-arm aggregates, one row per step + final
//! <arm>/run_NNN/metrics.csv
//! <arm>/run_NNN/network.bin
//! <arm>/run_NNN/config.json        the run's effective config and counters
//! ```

use std::fs;
use std::path::{Path, PathBuf};

use serde_json::json;

use noisysgd::model::Network;
use noisysgd::netfile;
use noisysgd::train::{aggregate, aggregate_final, initial_network, sweep_until, MetricsRecord, RunResult, TrainConfig};

use crate::config::{Arm, ExperimentConfig, StopConfig};
use crate::csvio::{write_metrics, write_summary, SummaryBlock};
use crate::{CliError, CliResult};

#[derive(Debug)]
pub struct ArmResult {
    pub arm: Arm,
    pub runs: Vec<RunResult<f64>>,
}

pub fn run_dir(out: &Path, arm: &Arm, run: usize) -> PathBuf {
    out.join(&arm.label).join(format!("run_{run:03}"))
}

fn io_err(path: &Path, e: impl std::fmt::Display) -> CliError {
    CliError::Run(format!("{}: {e}", path.display()))
}

fn stop_rule(
    stop: Option<StopConfig>,
    cfg: &TrainConfig<f64>,
) -> impl FnMut(&MetricsRecord, &Network<f64>) -> bool {
    let initial = match stop {
        Some(StopConfig::NormFraction { .. }) => initial_network(cfg).map_or(f64::INFINITY, |n| n.total_weight_norm()),
        _ => f64::INFINITY,
    };
    move |m, _| match stop {
        None => false,
        Some(StopConfig::NormFraction { fraction }) => m.total_weight_norm() <= fraction * initial,
        Some(StopConfig::Inactive) => m.active_train == Some(0.0),
    }
}

fn write_run(dir: &Path, cfg: &ExperimentConfig, arm: &Arm, run: usize, res: &RunResult<f64>) -> CliResult<()> {
    fs::create_dir_all(dir).map_err(|e| io_err(dir, e))?;
    write_metrics(&dir.join("metrics.csv"), run as u64, &res.metrics)?;
    let net_path = dir.join("network.bin");
    netfile::save(&res.network, &net_path).map_err(|e| io_err(&net_path, e))?;
    let echo = json!({
        "arm": arm.label,
        "p": arm.p,
        "noise": format!("{:?}", arm.noise),
        "run_id": run,
        "master_seed": cfg.seed,
        "arch": res.config.arch,
        "experiment": cfg,
        "steps": res.steps,
        "updates": res.updates,
        "zero_train_error_step": res.zero_train_error_step,
    });
    let path = dir.join("config.json");
    fs::write(&path, serde_json::to_string_pretty(&echo).expect("json") + "\n").map_err(|e| io_err(&path, e))
}

/// Trains all runs of all arms. Successful runs are written even when
/// others fail; any failure makes the result an error.
pub fn run_experiment(cfg: &ExperimentConfig, out: &Path) -> CliResult<Vec<ArmResult>> {
    cfg.validate()?;
    let data = cfg.data()?;
    let arms = cfg.arms()?;
    let configs: Vec<Vec<TrainConfig<f64>>> = arms
        .iter()
        .map(|arm| (0..cfg.runs).map(|r| cfg.train_config(&data, arm, r)).collect())
        .collect::<CliResult<_>>()?;
    fs::create_dir_all(out).map_err(|e| io_err(out, e))?;
    let mut echo = cfg.clone();
    echo.out = Some(out.to_path_buf());
    let path = out.join("config.json");
    fs::write(&path, echo.to_json() + "\n").map_err(|e| io_err(&path, e))?;

    let mut results = Vec::new();
    let mut failures = Vec::new();
    for (arm, configs) in arms.into_iter().zip(configs) {
        let outcomes = sweep_until(&configs, cfg.parallel, |c| stop_rule(cfg.stop, c))
            .map_err(|e| CliError::Run(e.to_string()))?;
        let mut runs = Vec::new();
        for (r, res) in outcomes.into_iter().enumerate() {
            match res {
                Ok(res) => {
                    write_run(&run_dir(out, &arm, r), cfg, &arm, r, &res)?;
                    runs.push(res);
                }
                Err(e) => failures.push(format!("{} run {r}: {e}", arm.label)),
            }
        }
        results.push(ArmResult { arm, runs });
    }

    let per_step: Vec<_> = results
        .iter()
        .map(|a| {
            let slices: Vec<&[MetricsRecord]> = a.runs.iter().map(|r| r.metrics.as_slice()).collect();
            (aggregate(&slices), aggregate_final(&a.runs))
        })
        .collect();
    let blocks: Vec<SummaryBlock<'_>> = results
        .iter()
        .zip(&per_step)
        .map(|(a, (steps, last))| SummaryBlock {
            arm: &a.arm.label,
            p: a.arm.p,
            per_step: steps,
            last: last.as_ref(),
        })
        .collect();
    write_summary(&out.join("summary.csv"), &blocks)?;
    if failures.is_empty() {
        Ok(results)
    } else {
        Err(CliError::Run(failures.join("\n")))
    }
}
