//! `verify <id>`: theorem checkers with defaults from `thm_defaults.json`,
//! overridden by flags.

use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};

use noisysgd::loss::SurrogateLoss;
use noisysgd::theorems::ap::{a_p_exact, check_a_p, default_tiny};
use noisysgd::theorems::{
    check_decay_rate, check_theorem1, check_theorem2, check_theorem3, check_theorem4, TheoremReport, Thm1Params,
    Thm2Params, Thm3Params, Thm4Params,
};

use crate::{CliError, CliResult};

pub const THEOREM_IDS: [&str; 6] = ["thm1", "thm2", "thm3", "thm4", "ap-exact", "decay-rate"];

/// The shipped defaults, also used when no `--config` is given.
pub const BUILTIN_DEFAULTS: &str = include_str!("../../../configs/thm_defaults.json");

/// Parameters a checker may take; unset fields keep the checker default.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize, clap::Args)]
#[serde(default, deny_unknown_fields)]
pub struct ThmOverrides {
    /// Half width of the fixed top layer (thm3, thm4).
    #[arg(long)]
    pub k: Option<usize>,
    /// Input dimension.
    #[arg(long)]
    pub d: Option<usize>,
    /// Learning rate.
    #[arg(long)]
    pub h: Option<f64>,
    #[arg(long)]
    pub seed: Option<u64>,
    /// Independent runs (thm2, thm3) or Monte Carlo runs per p (ap-exact).
    #[arg(long)]
    pub runs: Option<usize>,
    /// Random instances (thm1).
    #[arg(long)]
    pub trials: Option<usize>,
    /// SGD steps of the enumerated configuration (ap-exact).
    #[arg(long)]
    pub steps: Option<usize>,
    /// Step cap per run (thm3, thm4).
    #[arg(long)]
    pub max_steps: Option<u64>,
    /// Standard deviation of `W·x̃` (decay-rate).
    #[arg(long)]
    pub sigma: Option<f64>,
    /// Mean of `W·x̃` (decay-rate).
    #[arg(long)]
    pub mu: Option<f64>,
    /// Monte Carlo draws (decay-rate).
    #[arg(long)]
    pub draws: Option<usize>,
    /// Noise levels (ap-exact), comma separated.
    #[arg(long, value_delimiter = ',')]
    pub p: Option<Vec<f64>>,
    #[arg(long)]
    pub parallel: Option<usize>,
    /// Surrogate loss; config file only.
    #[arg(skip)]
    pub loss: Option<SurrogateLoss>,
}

impl ThmOverrides {
    /// Fields of `self`, falling back to `base`.
    pub fn over(self, base: &Self) -> Self {
        let b = base.clone();
        Self {
            k: self.k.or(b.k),
            d: self.d.or(b.d),
            h: self.h.or(b.h),
            seed: self.seed.or(b.seed),
            runs: self.runs.or(b.runs),
            trials: self.trials.or(b.trials),
            steps: self.steps.or(b.steps),
            max_steps: self.max_steps.or(b.max_steps),
            sigma: self.sigma.or(b.sigma),
            mu: self.mu.or(b.mu),
            draws: self.draws.or(b.draws),
            p: self.p.or(b.p),
            parallel: self.parallel.or(b.parallel),
            loss: self.loss.or(b.loss),
        }
    }
}

fn bad(msg: impl Into<String>) -> CliError {
    CliError::Config(msg.into())
}

pub fn parse_defaults(text: &str) -> CliResult<BTreeMap<String, ThmOverrides>> {
    let map: BTreeMap<String, ThmOverrides> = serde_json::from_str(text).map_err(|e| bad(e.to_string()))?;
    if let Some(k) = map.keys().find(|k| !THEOREM_IDS.contains(&k.as_str())) {
        return Err(bad(format!("unknown theorem id {k:?} in defaults")));
    }
    Ok(map)
}

pub fn load_defaults(path: Option<&Path>) -> CliResult<BTreeMap<String, ThmOverrides>> {
    match path {
        Some(p) => {
            let text = std::fs::read_to_string(p).map_err(|e| bad(format!("{}: {e}", p.display())))?;
            parse_defaults(&text).map_err(|e| bad(format!("{}: {e}", p.display())))
        }
        None => parse_defaults(BUILTIN_DEFAULTS),
    }
}

/// A checker's report plus extra lines to print after it.
pub struct Verified {
    pub report: TheoremReport,
    pub extra: String,
}

/// Runs checker `id` with `flags` over `defaults[id]`.
pub fn verify(id: &str, flags: ThmOverrides, defaults: &BTreeMap<String, ThmOverrides>) -> CliResult<Verified> {
    if !THEOREM_IDS.contains(&id) {
        return Err(bad(format!("unknown theorem id {id:?}; expected one of {}", THEOREM_IDS.join(", "))));
    }
    let o = flags.over(&defaults.get(id).cloned().unwrap_or_default());
    let arg = |e: noisysgd::Error| bad(e.to_string());
    let mut extra = String::new();
    let report = match id {
        "thm1" => {
            let mut p = Thm1Params::default();
            p.trials = o.trials.unwrap_or(p.trials);
            p.h = o.h.unwrap_or(p.h);
            p.seed = o.seed.unwrap_or(p.seed);
            check_theorem1(&p).map_err(arg)?
        }
        "thm2" => {
            let mut p = Thm2Params::new(
                o.d.unwrap_or(30),
                o.h.unwrap_or(1.0 / 900.0),
                o.loss.unwrap_or(SurrogateLoss::HINGE0),
            );
            if let Some(r) = o.runs {
                // Keep the 18-of-20 majority.
                p.runs = r;
                p.required = (9 * r).div_ceil(10);
            }
            p.seed = o.seed.unwrap_or(p.seed);
            check_theorem2(&p).map_err(arg)?
        }
        "thm3" => {
            let mut p = Thm3Params::new(o.k.unwrap_or(20), o.d.unwrap_or(10), o.h.unwrap_or(0.01));
            p.runs = o.runs.unwrap_or(p.runs);
            p.seed = o.seed.unwrap_or(p.seed);
            p.max_steps = o.max_steps.unwrap_or(p.max_steps);
            check_theorem3(&p).map_err(arg)?
        }
        "thm4" => {
            let mut p = Thm4Params::new(o.k.unwrap_or(500), o.d.unwrap_or(5), o.h.unwrap_or(1.0));
            p.seed = o.seed.unwrap_or(p.seed);
            p.max_steps = o.max_steps.unwrap_or(p.max_steps);
            check_theorem4(&p).map_err(arg)?
        }
        "ap-exact" => {
            let mut cfg = default_tiny(o.steps.unwrap_or(3)).map_err(arg)?;
            cfg.h = o.h.unwrap_or(cfg.h);
            cfg.loss = o.loss.unwrap_or(cfg.loss);
            let poly = a_p_exact(&cfg).map_err(arg)?;
            let terms: Vec<String> = poly
                .monomial
                .iter()
                .enumerate()
                .map(|(i, c)| match i {
                    0 => format!("{c}"),
                    1 => format!("({c})·p"),
                    _ => format!("({c})·p^{i}"),
                })
                .collect();
            extra = format!("a(p) = {}\n", terms.join(" + "));
            let grid = o.p.clone().unwrap_or_else(|| vec![0.0, 0.25, 0.5, 1.0]);
            check_a_p(&cfg, &grid, o.runs.unwrap_or(100_000), o.seed.unwrap_or(1), o.parallel.unwrap_or(1))
                .map_err(arg)?
        }
        "decay-rate" => check_decay_rate(
            o.sigma.unwrap_or(1.0),
            o.mu.unwrap_or(0.0),
            o.draws.unwrap_or(1_000_000),
            o.seed.unwrap_or(1),
        )
        .map_err(arg)?,
        _ => unreachable!("id checked above"),
    };
    Ok(Verified { report, extra })
}
