//! The ten-class experiment: a sweep plus a dead-neuron census and digit
//! association table per run, both over the test set.

use std::path::Path;

use noisysgd::model::{dead_neurons, typical_active};
use noisysgd::theorems::{digit_association, AssociationTable};

use crate::config::{DataConfig, ExperimentConfig};
use crate::csvio::fmt17;
use crate::runner::{run_dir, run_experiment};
use crate::{CliError, CliResult};

/// Association threshold: top digit at least twice every other digit.
pub const THRESHOLD_FACTOR: f64 = 2.0;

#[derive(Debug, Clone, PartialEq)]
pub struct Census {
    pub arm: String,
    pub p: Option<f64>,
    pub run: usize,
    pub hidden: usize,
    pub active_fraction: f64,
    pub dead: Vec<usize>,
    pub table: AssociationTable,
}

fn io_err(path: &Path, e: impl std::fmt::Display) -> CliError {
    CliError::Run(format!("{}: {e}", path.display()))
}

fn write_table(path: &Path, dead: &[usize], t: &AssociationTable) -> CliResult<()> {
    let mut w = csv::Writer::from_path(path).map_err(|e| io_err(path, e))?;
    let mut header = vec!["neuron".to_string(), "dead".into(), "associated".into()];
    header.extend((0..t.histograms.first().map_or(0, Vec::len)).map(|c| format!("count_{c}")));
    w.write_record(&header).map_err(|e| io_err(path, e))?;
    for (i, h) in t.histograms.iter().enumerate() {
        let mut row = vec![
            i.to_string(),
            u8::from(dead.binary_search(&i).is_ok()).to_string(),
            t.associated[i].map(|c| c.to_string()).unwrap_or_default(),
        ];
        row.extend(h.iter().map(u64::to_string));
        w.write_record(&row).map_err(|e| io_err(path, e))?;
    }
    w.flush().map_err(|e| io_err(path, e))
}

pub fn run_mnist(cfg: &ExperimentConfig, out: &Path) -> CliResult<Vec<Census>> {
    if !matches!(cfg.data, DataConfig::Mnist { .. }) {
        return Err(CliError::Config("mnist needs data.kind = \"mnist\"".into()));
    }
    let arms = run_experiment(cfg, out)?;
    let mut census = Vec::new();
    for a in &arms {
        for (r, res) in a.runs.iter().enumerate() {
            let test = res.config.test.as_ref().expect("MNIST runs carry a test set");
            let inputs = &test.inputs;
            let hidden = res.network.hidden_width(0).map_err(|e| CliError::Run(e.to_string()))?;
            let active = typical_active(&res.network, inputs, 0).map_err(|e| CliError::Run(e.to_string()))?;
            let dead = dead_neurons(&res.network, inputs, 0).map_err(|e| CliError::Run(e.to_string()))?;
            let table =
                digit_association(&res.network, test, THRESHOLD_FACTOR).map_err(|e| CliError::Run(e.to_string()))?;
            write_table(&run_dir(out, &a.arm, r).join("census.csv"), &dead, &table)?;
            census.push(Census {
                arm: a.arm.label.clone(),
                p: a.arm.p,
                run: r,
                hidden,
                active_fraction: active / hidden as f64,
                dead,
                table,
            });
        }
    }
    let path = out.join("mnist_summary.csv");
    let mut w = csv::Writer::from_path(&path).map_err(|e| io_err(&path, e))?;
    w.write_record(["arm", "p", "run_id", "hidden", "active_fraction_test", "dead", "associated"])
        .map_err(|e| io_err(&path, e))?;
    for c in &census {
        w.write_record([
            c.arm.clone(),
            c.p.map(fmt17).unwrap_or_default(),
            c.run.to_string(),
            c.hidden.to_string(),
            fmt17(c.active_fraction),
            c.dead.len().to_string(),
            c.table.associated_count().to_string(),
        ])
        .map_err(|e| io_err(&path, e))?;
    }
    w.flush().map_err(|e| io_err(&path, e))?;
    Ok(census)
}
