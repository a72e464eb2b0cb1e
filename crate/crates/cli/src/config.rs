//! Experiment configs: a JSON key tree mirroring `TrainConfig`, plus the
//! noise grid, run count and output directory. Unknown keys are errors.

use std::path::{Path, PathBuf};
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use noisysgd::data::{make_hypercube_dataset, Distribution, LabeledDataset};
use noisysgd::idx::{load_mnist_idx, mnist_paths};
use noisysgd::loss::SurrogateLoss;
use noisysgd::model::{ActivationKind, ArchSpec, ModeKind};
use noisysgd::netfile;
use noisysgd::rng::{stream_id, RngStream};
use noisysgd::train::{Budget, InitSpec, NoiseSpec, Schedule, TrainConfig};

use crate::{CliError, CliResult};

pub const DATA_DIR_ENV: &str = "NOISYSGD_DATA_DIR";

/// Dataset streams live outside the per-run id range.
const DATA_RUN_ID: u64 = u64::MAX;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ExperimentKind {
    Train,
    Sweep,
    Mnist,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum DataConfig {
    Gaussian {
        d: usize,
    },
    StandardBasis {
        d: usize,
    },
    /// Without `train_size`, SGD samples the distribution afresh each step.
    Hypercube {
        d: usize,
        eps: f64,
        #[serde(default)]
        train_size: Option<usize>,
        #[serde(default)]
        test_size: usize,
    },
    /// IDX files under `dir`, or under `$NOISYSGD_DATA_DIR`.
    Mnist {
        #[serde(default)]
        train_limit: Option<usize>,
        #[serde(default)]
        test_limit: Option<usize>,
        #[serde(default)]
        dir: Option<PathBuf>,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ArchConfig {
    pub hidden: Vec<usize>,
    pub mode: ModeKind,
    #[serde(default = "relu")]
    pub activation: ActivationKind,
    #[serde(default = "one")]
    pub output_width: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum InitConfig {
    Uniform { half_width: f64 },
    /// A saved network file.
    File { path: PathBuf },
}

impl Default for InitConfig {
    fn default() -> Self {
        Self::Uniform {
            half_width: 3f64.sqrt(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NoiseKind {
    None,
    LabelNoise,
    PureNoise,
    Smoothing,
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum ScheduleConfig {
    #[default]
    Constant,
    HalveEvery { epochs: u64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum BudgetConfig {
    Steps { steps: u64 },
    Epochs { epochs: u64 },
    ZeroTrainErrorThenRepeat { check_every: u64, max_steps: u64 },
}

/// Early exit, checked at metric points.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum StopConfig {
    /// Total weight norm at most `fraction` of its initial value.
    NormFraction { fraction: f64 },
    /// No hidden neuron fires on the activity probe set.
    Inactive,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    #[serde(default)]
    pub experiment: Option<ExperimentKind>,
    #[serde(default)]
    pub description: Option<String>,
    pub data: DataConfig,
    pub arch: ArchConfig,
    #[serde(default)]
    pub init: InitConfig,
    pub loss: SurrogateLoss,
    pub noise: NoiseKind,
    #[serde(default)]
    pub p: Vec<f64>,
    pub learning_rate: f64,
    #[serde(default)]
    pub schedule: ScheduleConfig,
    pub budget: BudgetConfig,
    #[serde(default = "one")]
    pub batch_size: usize,
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "one")]
    pub runs: usize,
    #[serde(default)]
    pub metric_every: u64,
    #[serde(default = "probe_size")]
    pub probe_size: usize,
    #[serde(default = "one")]
    pub parallel: usize,
    #[serde(default)]
    pub out: Option<PathBuf>,
    #[serde(default)]
    pub stop: Option<StopConfig>,
}

fn one() -> usize {
    1
}

fn probe_size() -> usize {
    1000
}

fn relu() -> ActivationKind {
    ActivationKind::Relu
}

/// One noise level of a sweep; its runs live under `out/<label>/`.
#[derive(Debug, Clone, PartialEq)]
pub struct Arm {
    pub label: String,
    pub p: Option<f64>,
    pub noise: NoiseSpec,
}

/// Resolved datasets, shared by every run of an experiment.
#[derive(Debug, Clone)]
pub struct Data {
    pub distribution: Distribution<f64>,
    pub test: Option<Arc<LabeledDataset<f64>>>,
}

fn bad(msg: impl Into<String>) -> CliError {
    CliError::Config(msg.into())
}

impl ExperimentConfig {
    pub fn from_json(text: &str) -> CliResult<Self> {
        serde_json::from_str(text).map_err(|e| bad(e.to_string()))
    }

    pub fn load(path: &Path) -> CliResult<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| bad(format!("{}: {e}", path.display())))?;
        Self::from_json(&text).map_err(|e| bad(format!("{}: {e}", path.display())))
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("configs serialize")
    }

    /// Checks everything that does not need the data files.
    pub fn validate(&self) -> CliResult<()> {
        if self.runs == 0 {
            return Err(bad("runs must be at least 1"));
        }
        if self.parallel == 0 {
            return Err(bad("parallel must be at least 1"));
        }
        if self.batch_size == 0 {
            return Err(bad("batch_size must be at least 1"));
        }
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return Err(bad(format!("learning_rate must be positive, got {}", self.learning_rate)));
        }
        if let StopConfig::NormFraction { fraction } = self.stop.unwrap_or(StopConfig::Inactive) {
            if !(fraction > 0.0) {
                return Err(bad(format!("stop fraction must be positive, got {fraction}")));
            }
        }
        self.loss.validate().map_err(|e| bad(e.to_string()))?;
        self.arch_spec()?;
        self.arms().map(|_| ())
    }

    pub fn arms(&self) -> CliResult<Vec<Arm>> {
        let noisy = matches!(self.noise, NoiseKind::LabelNoise | NoiseKind::Smoothing);
        if noisy && self.p.is_empty() {
            return Err(bad("p list is empty"));
        }
        if !noisy && !self.p.is_empty() {
            return Err(bad(format!("noise {:?} takes no p list", self.noise)));
        }
        for (i, &p) in self.p.iter().enumerate() {
            if !(0.0..=1.0).contains(&p) {
                return Err(bad(format!("p = {p} outside [0, 1]")));
            }
            if self.p[..i].contains(&p) {
                return Err(bad(format!("p = {p} listed twice")));
            }
        }
        Ok(match self.noise {
            NoiseKind::None => vec![Arm {
                label: "clean".into(),
                p: None,
                noise: NoiseSpec::None,
            }],
            NoiseKind::PureNoise => vec![Arm {
                label: "pure_noise".into(),
                p: None,
                noise: NoiseSpec::PureNoise,
            }],
            NoiseKind::LabelNoise | NoiseKind::Smoothing => self
                .p
                .iter()
                .map(|&p| Arm {
                    label: format!("p={p}"),
                    p: Some(p),
                    noise: if self.noise == NoiseKind::LabelNoise {
                        NoiseSpec::LabelNoise(p)
                    } else {
                        NoiseSpec::Smoothing(p)
                    },
                })
                .collect(),
        })
    }

    pub fn input_dim(&self) -> usize {
        match &self.data {
            DataConfig::Gaussian { d } | DataConfig::StandardBasis { d } | DataConfig::Hypercube { d, .. } => *d,
            DataConfig::Mnist { .. } => 784,
        }
    }

    pub fn arch_spec(&self) -> CliResult<ArchSpec> {
        let spec = ArchSpec {
            input_dim: self.input_dim(),
            hidden: self.arch.hidden.clone(),
            output_width: self.arch.output_width,
            activation: self.arch.activation,
            mode: self.arch.mode,
        };
        let classes = matches!(self.data, DataConfig::Mnist { .. });
        if classes && spec.output_width != 10 {
            return Err(bad("MNIST needs output_width 10"));
        }
        if !classes && spec.output_width != 1 {
            return Err(bad("binary tasks need output_width 1"));
        }
        Ok(spec)
    }

    pub fn schedule(&self) -> Schedule {
        match self.schedule {
            ScheduleConfig::Constant => Schedule::Constant,
            ScheduleConfig::HalveEvery { epochs } => Schedule::HalveEvery { epochs },
        }
    }

    pub fn budget(&self) -> Budget {
        match self.budget {
            BudgetConfig::Steps { steps } => Budget::Steps(steps),
            BudgetConfig::Epochs { epochs } => Budget::Epochs(epochs),
            BudgetConfig::ZeroTrainErrorThenRepeat { check_every, max_steps } => {
                Budget::ZeroTrainErrorThenRepeat { check_every, max_steps }
            }
        }
    }

    /// MNIST directory from the config or the environment.
    pub fn mnist_dir(&self) -> CliResult<PathBuf> {
        let DataConfig::Mnist { dir, .. } = &self.data else {
            return Err(bad("not an MNIST config"));
        };
        dir.clone()
            .or_else(|| std::env::var_os(DATA_DIR_ENV).map(PathBuf::from))
            .ok_or_else(|| bad(missing_mnist_message(None)))
    }

    /// Builds the datasets. Generated sets come from streams of `seed`
    /// reserved for data, so every run and arm sees the same sets.
    pub fn data(&self) -> CliResult<Data> {
        let gen = |tag: u64, n: usize, d: usize, eps: f64| {
            make_hypercube_dataset::<f64>(d, eps, n, &mut RngStream::new(self.seed, stream_id(DATA_RUN_ID, tag)))
                .map(Arc::new)
                .map_err(|e| bad(e.to_string()))
        };
        Ok(match &self.data {
            DataConfig::Gaussian { d } => Data {
                distribution: Distribution::Gaussian { d: *d },
                test: None,
            },
            DataConfig::StandardBasis { d } => Data {
                distribution: Distribution::StandardBasis { d: *d },
                test: None,
            },
            DataConfig::Hypercube {
                d,
                eps,
                train_size,
                test_size,
            } => Data {
                distribution: match train_size {
                    Some(n) => Distribution::FixedSet(gen(0, *n, *d, *eps)?),
                    None => Distribution::HypercubeBoundary { d: *d, eps: *eps },
                },
                test: if *test_size > 0 {
                    Some(gen(1, *test_size, *d, *eps)?)
                } else {
                    None
                },
            },
            DataConfig::Mnist {
                train_limit,
                test_limit,
                ..
            } => {
                let dir = self.mnist_dir()?;
                let [(ti, tl), (vi, vl)] = mnist_paths(&dir);
                for p in [&ti, &tl, &vi, &vl] {
                    if !p.is_file() {
                        return Err(bad(missing_mnist_message(Some(p))));
                    }
                }
                let load = |i: &Path, l: &Path, limit: Option<usize>| {
                    load_mnist_idx::<f64>(i, l, limit).map(Arc::new).map_err(|e| bad(e.to_string()))
                };
                Data {
                    distribution: Distribution::FixedSet(load(&ti, &tl, *train_limit)?),
                    test: Some(load(&vi, &vl, *test_limit)?),
                }
            }
        })
    }

    fn init(&self) -> CliResult<InitSpec<f64>> {
        Ok(match &self.init {
            InitConfig::Uniform { half_width } => InitSpec::Uniform {
                half_width: *half_width,
            },
            InitConfig::File { path } => {
                InitSpec::Given(netfile::load(path).map_err(|e| bad(format!("{}: {e}", path.display())))?)
            }
        })
    }

    /// Run `run` of `arm`. Run ids restart at 0 in every arm, so arms share
    /// initial weights and sample indices run by run.
    pub fn train_config(&self, data: &Data, arm: &Arm, run: usize) -> CliResult<TrainConfig<f64>> {
        let mut cfg = TrainConfig::new(
            data.distribution.clone(),
            self.arch_spec()?,
            self.loss,
            arm.noise,
            self.learning_rate,
            self.budget(),
        );
        cfg.test = data.test.clone();
        cfg.init = self.init()?;
        cfg.schedule = self.schedule();
        cfg.batch_size = self.batch_size;
        cfg.master_seed = self.seed;
        cfg.run_id = run as u64;
        cfg.metric_every = self.metric_every;
        cfg.probe_size = self.probe_size;
        cfg.validate().map_err(|e| bad(e.to_string()))?;
        Ok(cfg)
    }
}

pub fn missing_mnist_message(file: Option<&Path>) -> String {
    let what = match file {
        Some(p) => format!("missing MNIST file {}", p.display()),
        None => format!("no MNIST directory: set {DATA_DIR_ENV} or data.dir"),
    };
    format!(
        "{what}\n\
         Place the four IDX files (train-images-idx3-ubyte, train-labels-idx1-ubyte,\n\
         t10k-images-idx3-ubyte, t10k-labels-idx1-ubyte) in one directory and point\n\
         {DATA_DIR_ENV} at it. They are published at https://yann.lecun.com/exdb/mnist/\n\
         (gunzip after download); scripts/mnist_from_npm.py builds a smaller set from\n\
         the npm `mnist` package."
    )
}
