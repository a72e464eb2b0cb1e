//! Label corruption, batch-size-one SGD, metrics and deterministic sweeps.
//!
//! Every stochastic choice of a run comes from streams keyed on
//! `(master_seed, stream_id(run_id, tag))`:
//!
//! | tag           | consumer                                   |
//! |---------------|--------------------------------------------|
//! | [`TAG_INIT`]  | weight initialization                      |
//! | [`TAG_SGD`]   | per step: sample, then flip bit, then replacement label |
//! | [`TAG_PROBE`] | probe inputs for unlabeled distributions   |
//!
//! Within a step the draw order is fixed: the sample (index or fresh
//! coordinates), then the Bernoulli flip bit (always one word, even at
//! `p = 0`), then the replacement label only when the bit is set. Pure
//! noise skips the flip bit and draws the label directly.

use std::sync::Arc;
use std::time::{Duration, Instant};

use rayon::prelude::*;

use crate::data::{sample, Distribution, Label, LabelSet, LabeledDataset};
use crate::error::{Error, Result};
use crate::linalg::Vector;
use crate::loss::{backprop, layer_deltas, layer_input, output_gradient, SurrogateLoss, TargetSpec};
use crate::model::{forward, sparse_support, ArchSpec, ForwardTrace, Network};
use crate::rng::{stream_id, RngStream};
use crate::scalar::Scalar;

pub const TAG_INIT: u64 = 0;
pub const TAG_SGD: u64 = 1;
pub const TAG_PROBE: u64 = 2;

/// How the label of each SGD sample is perturbed.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum NoiseSpec {
    None,
    /// With probability `p`, replace the label by a uniform draw from the
    /// label set (possibly the same label).
    LabelNoise(f64),
    /// Labels uniform on the label set, independent of the input.
    PureNoise,
    /// Labels untouched; class targets become the smoothed distribution.
    Smoothing(f64),
}

impl NoiseSpec {
    pub fn validate(self) -> Result<()> {
        match self {
            Self::LabelNoise(p) | Self::Smoothing(p) if !(0.0..=1.0).contains(&p) => {
                Err(Error::InvalidArgument(format!("noise probability {p} outside [0, 1]")))
            }
            _ => Ok(()),
        }
    }
}

/// Label fed to SGD after noise. Draw order: flip bit, then replacement.
pub fn corrupt_label(y: Label, noise: NoiseSpec, labels: LabelSet, rng: &mut RngStream) -> Label {
    match noise {
        NoiseSpec::None | NoiseSpec::Smoothing(_) => y,
        NoiseSpec::LabelNoise(p) => {
            if rng.draw_bernoulli(p) {
                uniform_label(labels, rng)
            } else {
                y
            }
        }
        NoiseSpec::PureNoise => uniform_label(labels, rng),
    }
}

fn uniform_label(labels: LabelSet, rng: &mut RngStream) -> Label {
    let i = ((rng.next_u64() as u128 * labels.size() as u128) >> 64) as usize;
    labels.label(i)
}

/// Loss target for a (possibly corrupted) label.
pub fn target_for(y: Label, noise: NoiseSpec, output_width: usize) -> Result<TargetSpec> {
    match (y, noise) {
        (Label::Sign(s), NoiseSpec::Smoothing(_)) => Err(Error::InvalidArgument(format!(
            "label smoothing needs class labels, got sign {s}"
        ))),
        (Label::Sign(s), _) => TargetSpec::binary(s as f64),
        (Label::Class(c), NoiseSpec::Smoothing(p)) => Ok(TargetSpec::Smoothed {
            p,
            true_class: c as usize,
        }),
        (Label::Class(c), _) => TargetSpec::one_vs_rest(c as usize, output_width),
    }
}

/// What one SGD step saw.
#[derive(Debug, Clone, PartialEq)]
pub struct StepInfo<T> {
    /// Network output before the update.
    pub output: Vector<T>,
    /// Whether any parameter received a nonzero gradient.
    pub updated: bool,
}

/// One in-place SGD step `θ -= h ∇θ L`. Entries with a zero factor are
/// skipped; the result equals `apply_gradient` of `backprop` (up to the sign
/// of zero).
pub fn sgd_step<T: Scalar>(
    net: &mut Network<T>,
    x: &Vector<T>,
    target: &TargetSpec,
    loss: SurrogateLoss,
    h: T,
) -> Result<StepInfo<T>> {
    let trace = forward(net, x)?;
    let updated = step_from_trace(net, &trace, target, loss, h)?;
    Ok(StepInfo {
        output: trace.output,
        updated,
    })
}

fn step_from_trace<T: Scalar>(
    net: &mut Network<T>,
    trace: &ForwardTrace<T>,
    target: &TargetSpec,
    loss: SurrogateLoss,
    h: T,
) -> Result<bool> {
    let dout = output_gradient(trace.output.as_slice(), target, loss)?;
    if dout.iter().all(|g| g.is_zero()) {
        return Ok(false);
    }
    let deltas = layer_deltas(net, trace, &dout)?;
    let mut updated = false;
    for (l, layer) in net.layers_mut().iter_mut().enumerate() {
        let a = layer_input(trace, l);
        let support = if l == 0 { sparse_support(a) } else { None };
        for (i, &d) in deltas[l].iter().enumerate() {
            if d.is_zero() {
                continue;
            }
            updated = true;
            let row = layer.weight.row_mut(i);
            match &support {
                Some(idx) => {
                    for &j in idx {
                        row[j] -= h * (d * a[j]);
                    }
                }
                None => {
                    for (w, &aj) in row.iter_mut().zip(a) {
                        *w -= h * (d * aj);
                    }
                }
            }
            if let Some(b) = &mut layer.bias {
                b.as_mut_slice()[i] -= h * d;
            }
        }
    }
    Ok(updated)
}

/// `θ -= h g` for a gradient shaped like `net`.
pub fn apply_gradient<T: Scalar>(net: &mut Network<T>, grad: &crate::loss::GradientSet<T>, h: T) -> Result<()> {
    if grad.layers.len() != net.layers().len() {
        return Err(Error::Shape {
            op: "apply_gradient",
            left: format!("{} layers", net.layers().len()),
            right: format!("{} gradient layers", grad.layers.len()),
        });
    }
    for (layer, g) in net.layers_mut().iter_mut().zip(&grad.layers) {
        if layer.weight.shape() != g.weight.shape() {
            return Err(Error::Shape {
                op: "apply_gradient",
                left: format!("{:?}", layer.weight.shape()),
                right: format!("{:?}", g.weight.shape()),
            });
        }
        for (w, &gw) in layer.weight.as_mut_slice().iter_mut().zip(g.weight.as_slice()) {
            *w -= h * gw;
        }
        if let (Some(b), Some(gb)) = (&mut layer.bias, &g.bias) {
            for (bi, &gi) in b.as_mut_slice().iter_mut().zip(gb.as_slice()) {
                *bi -= h * gi;
            }
        }
    }
    Ok(())
}

/// Averaged gradient step over several samples.
pub fn sgd_batch_step<T: Scalar>(
    net: &mut Network<T>,
    batch: &[(Vector<T>, TargetSpec)],
    loss: SurrogateLoss,
    h: T,
) -> Result<bool> {
    let Some(((x0, t0), rest)) = batch.split_first() else {
        return Err(Error::Empty("batch"));
    };
    if rest.is_empty() {
        return Ok(sgd_step(net, x0, t0, loss, h)?.updated);
    }
    let mut sum = backprop(net, &forward(net, x0)?, t0, loss)?;
    for (x, t) in rest {
        let g = backprop(net, &forward(net, x)?, t, loss)?;
        for (acc, gl) in sum.layers.iter_mut().zip(&g.layers) {
            for (a, &b) in acc.weight.as_mut_slice().iter_mut().zip(gl.weight.as_slice()) {
                *a += b;
            }
            if let (Some(ab), Some(bb)) = (&mut acc.bias, &gl.bias) {
                for (a, &b) in ab.as_mut_slice().iter_mut().zip(bb.as_slice()) {
                    *a += b;
                }
            }
        }
    }
    let updated = !sum.is_zero();
    apply_gradient(net, &sum, h / T::cast(batch.len() as f64))?;
    Ok(updated)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Schedule {
    Constant,
    /// Halve the rate after every `epochs` epochs.
    HalveEvery { epochs: u64 },
}

impl Schedule {
    pub fn rate(self, h: f64, step: u64, epoch_len: Option<u64>) -> f64 {
        match (self, epoch_len) {
            (Self::HalveEvery { epochs }, Some(n)) if epochs > 0 && n > 0 => {
                h * 0.5f64.powi((step / (epochs * n)).min(1100) as i32)
            }
            _ => h,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Budget {
    Steps(u64),
    /// Passes of dataset-size many steps (sampling with replacement).
    Epochs(u64),
    /// Train until the clean training error is zero at a check, then as many
    /// steps again; stop at `max_steps` regardless.
    ZeroTrainErrorThenRepeat { check_every: u64, max_steps: u64 },
}

#[derive(Debug, Clone, PartialEq)]
pub enum InitSpec<T> {
    Uniform { half_width: f64 },
    Given(Network<T>),
}

impl<T> InitSpec<T> {
    /// The default law `U[-√3, √3]` (unit variance).
    pub fn unit_variance() -> Self {
        Self::Uniform {
            half_width: 3f64.sqrt(),
        }
    }
}

/// Full description of one run.
#[derive(Debug, Clone, PartialEq)]
pub struct TrainConfig<T> {
    pub distribution: Distribution<T>,
    pub test: Option<Arc<LabeledDataset<T>>>,
    pub arch: ArchSpec,
    pub init: InitSpec<T>,
    pub loss: SurrogateLoss,
    pub noise: NoiseSpec,
    pub learning_rate: f64,
    pub schedule: Schedule,
    pub budget: Budget,
    pub batch_size: usize,
    pub master_seed: u64,
    pub run_id: u64,
    /// Metrics every this many steps (plus start and end); 0 means start and
    /// end only.
    pub metric_every: u64,
    /// Fresh inputs used for activity metrics when the distribution has no
    /// fixed dataset.
    pub probe_size: usize,
}

impl<T: Scalar> TrainConfig<T> {
    /// Defaults: `U[-√3, √3]` init, constant rate, batch 1, 1000 probes.
    pub fn new(
        distribution: Distribution<T>,
        arch: ArchSpec,
        loss: SurrogateLoss,
        noise: NoiseSpec,
        learning_rate: f64,
        budget: Budget,
    ) -> Self {
        Self {
            distribution,
            test: None,
            arch,
            init: InitSpec::unit_variance(),
            loss,
            noise,
            learning_rate,
            schedule: Schedule::Constant,
            budget,
            batch_size: 1,
            master_seed: 0,
            run_id: 0,
            metric_every: 0,
            probe_size: 1000,
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.distribution.validate()?;
        self.loss.validate()?;
        self.noise.validate()?;
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return Err(Error::InvalidArgument(format!(
                "learning rate must be positive, got {}",
                self.learning_rate
            )));
        }
        if self.batch_size == 0 {
            return Err(Error::InvalidArgument("batch size must be positive".into()));
        }
        if self.distribution.dim() != self.arch.input_dim {
            return Err(Error::Shape {
                op: "config",
                left: format!("distribution dim {}", self.distribution.dim()),
                right: format!("network input dim {}", self.arch.input_dim),
            });
        }
        let labeled = matches!(self.distribution, Distribution::FixedSet(_) | Distribution::HypercubeBoundary { .. });
        if !labeled && self.noise != NoiseSpec::PureNoise {
            return Err(Error::InvalidArgument(
                "unlabeled distributions need pure label noise".into(),
            ));
        }
        if self.epoch_len().is_none()
            && (matches!(self.budget, Budget::Epochs(_) | Budget::ZeroTrainErrorThenRepeat { .. })
                || matches!(self.schedule, Schedule::HalveEvery { .. }))
        {
            return Err(Error::InvalidArgument(
                "epoch-based budgets and schedules need a fixed dataset".into(),
            ));
        }
        if let Budget::ZeroTrainErrorThenRepeat { check_every: 0, .. } = self.budget {
            return Err(Error::InvalidArgument("check_every must be positive".into()));
        }
        if let Some(t) = &self.test {
            if t.dim() != Some(self.arch.input_dim) {
                return Err(Error::InvalidArgument("test set dimension differs from network input".into()));
            }
        }
        Ok(())
    }

    fn epoch_len(&self) -> Option<u64> {
        match &self.distribution {
            Distribution::FixedSet(ds) => Some(ds.len() as u64),
            _ => None,
        }
    }

    fn max_steps(&self) -> u64 {
        match self.budget {
            Budget::Steps(n) => n,
            Budget::Epochs(e) => e * self.epoch_len().unwrap_or(0),
            Budget::ZeroTrainErrorThenRepeat { max_steps, .. } => max_steps,
        }
    }
}

/// Metrics at one step. Activity and bias columns refer to the first hidden
/// layer; absent values are `None`.
#[derive(Debug, Clone, PartialEq)]
pub struct MetricsRecord {
    pub step: u64,
    pub lr: f64,
    /// Frobenius norm of each trainable weight matrix.
    pub layer_norms: Vec<f64>,
    /// Mean bias of each layer (`None` without biases).
    pub bias_means: Vec<Option<f64>>,
    pub active_train: Option<f64>,
    pub active_test: Option<f64>,
    pub err_train: Option<f64>,
    pub err_test: Option<f64>,
}

impl MetricsRecord {
    pub fn total_weight_norm(&self) -> f64 {
        self.layer_norms.iter().map(|n| n * n).sum::<f64>().sqrt()
    }
}

#[derive(Debug, Clone)]
pub struct RunResult<T> {
    pub config: TrainConfig<T>,
    pub initial: Network<T>,
    pub network: Network<T>,
    pub metrics: Vec<MetricsRecord>,
    pub steps: u64,
    /// Steps that changed at least one parameter.
    pub updates: u64,
    /// First check at which the clean training error was zero.
    pub zero_train_error_step: Option<u64>,
    pub wall_time: Duration,
}

impl<T: Scalar> RunResult<T> {
    pub fn last_metrics(&self) -> &MetricsRecord {
        self.metrics.last().expect("a run records at least its start")
    }
}

/// Fraction of samples with a wrong sign (ties count as wrong) or, for class
/// labels, a wrong argmax (ties resolved to the lowest index), plus the
/// mean active count of the first hidden layer.
pub fn evaluate<T: Scalar>(net: &Network<T>, ds: &LabeledDataset<T>) -> Result<(f64, Option<f64>)> {
    if ds.is_empty() {
        return Err(Error::Empty("evaluation dataset"));
    }
    let hidden = net.hidden_layer_count() > 0;
    let (mut wrong, mut active) = (0usize, 0usize);
    for (x, &y) in ds.inputs.iter().zip(&ds.labels) {
        let t = forward(net, x)?;
        wrong += !correct(t.output.as_slice(), y) as usize;
        if hidden {
            active += t.preactivations[0].as_slice().iter().filter(|&&z| z > T::zero()).count();
        }
    }
    let n = ds.len() as f64;
    Ok((wrong as f64 / n, hidden.then(|| active as f64 / n)))
}

fn correct<T: Scalar>(out: &[T], y: Label) -> bool {
    match y {
        Label::Sign(s) => out[0].as_f64() * s as f64 > 0.0,
        Label::Class(c) => argmax(out) == c as usize,
    }
}

pub fn argmax<T: Scalar>(out: &[T]) -> usize {
    let mut best = 0;
    for (i, &v) in out.iter().enumerate() {
        if v > out[best] {
            best = i;
        }
    }
    best
}

/// Clean training error on the fixed dataset, if any.
fn train_error<T: Scalar>(net: &Network<T>, dist: &Distribution<T>) -> Result<Option<f64>> {
    match dist {
        Distribution::FixedSet(ds) => Ok(Some(evaluate(net, ds)?.0)),
        _ => Ok(None),
    }
}

struct Probe<T> {
    inputs: Vec<Vector<T>>,
}

fn record<T: Scalar>(
    net: &Network<T>,
    cfg: &TrainConfig<T>,
    probe: &Probe<T>,
    step: u64,
    lr: f64,
) -> Result<MetricsRecord> {
    net.check_finite().map_err(|e| Error::Diverged {
        step,
        detail: format!("parameters: {e}"),
    })?;
    let (err_train, mut active_train) = match &cfg.distribution {
        Distribution::FixedSet(ds) => {
            let (e, a) = evaluate(net, ds)?;
            (Some(e), a)
        }
        _ => (None, None),
    };
    if active_train.is_none() && net.hidden_layer_count() > 0 && !probe.inputs.is_empty() {
        active_train = Some(crate::model::typical_active(net, &probe.inputs, 0)?);
    }
    let (err_test, active_test) = match &cfg.test {
        Some(t) => {
            let (e, a) = evaluate(net, t)?;
            (Some(e), a)
        }
        None => (None, None),
    };
    Ok(MetricsRecord {
        step,
        lr,
        layer_norms: net.layers().iter().map(|l| l.weight.frobenius_norm().as_f64()).collect(),
        bias_means: net
            .layers()
            .iter()
            .map(|l| l.bias.as_ref().map(|b| b.mean().as_f64()))
            .collect(),
        active_train,
        active_test,
        err_train,
        err_test,
    })
}

/// Initial network for a config, from its own stream.
pub fn initial_network<T: Scalar>(cfg: &TrainConfig<T>) -> Result<Network<T>> {
    match &cfg.init {
        InitSpec::Uniform { half_width } => {
            let mut rng = RngStream::new(cfg.master_seed, stream_id(cfg.run_id, TAG_INIT));
            Network::init_uniform(&cfg.arch, *half_width, &mut rng)
        }
        InitSpec::Given(net) => {
            if net.spec() != cfg.arch {
                return Err(Error::InvalidArgument(format!(
                    "given network {:?} does not match architecture {:?}",
                    net.spec(),
                    cfg.arch
                )));
            }
            Ok(net.clone())
        }
    }
}

/// Draws one SGD sample and its (noisy) target. Unlabeled draws take the
/// pure-noise label.
pub fn draw_example<T: Scalar>(
    cfg: &TrainConfig<T>,
    rng: &mut RngStream,
) -> Result<(Vector<T>, TargetSpec)> {
    let (x, clean) = sample(&cfg.distribution, rng)?;
    let labels = cfg.distribution.label_set();
    let y = match clean {
        Some(y) => corrupt_label(y, cfg.noise, labels, rng),
        None => uniform_label(labels, rng),
    };
    Ok((x, target_for(y, cfg.noise, cfg.arch.output_width)?))
}

/// Runs SGD as configured. Deterministic given `(master_seed, run_id)`.
pub fn train<T: Scalar>(cfg: &TrainConfig<T>) -> Result<RunResult<T>> {
    train_until(cfg, |_, _| false)
}

/// [`train`], but `stop` sees every recorded metric point (after the start)
/// and may end the run there.
pub fn train_until<T: Scalar>(
    cfg: &TrainConfig<T>,
    mut stop: impl FnMut(&MetricsRecord, &Network<T>) -> bool,
) -> Result<RunResult<T>> {
    let start = Instant::now();
    cfg.validate()?;
    let initial = initial_network(cfg)?;
    let mut net = initial.clone();
    let probe = Probe {
        inputs: match cfg.distribution {
            Distribution::FixedSet(_) => Vec::new(),
            _ => {
                let mut rng = RngStream::new(cfg.master_seed, stream_id(cfg.run_id, TAG_PROBE));
                (0..cfg.probe_size)
                    .map(|_| sample(&cfg.distribution, &mut rng).map(|s| s.0))
                    .collect::<Result<_>>()?
            }
        },
    };
    let mut rng = RngStream::new(cfg.master_seed, stream_id(cfg.run_id, TAG_SGD));
    let epoch_len = cfg.epoch_len();
    let mut end = cfg.max_steps();
    let mut metrics = vec![record(&net, cfg, &probe, 0, cfg.schedule.rate(cfg.learning_rate, 0, epoch_len))?];
    let (mut updates, mut zero_step) = (0u64, None);
    if let Budget::ZeroTrainErrorThenRepeat { .. } = cfg.budget {
        if train_error(&net, &cfg.distribution)? == Some(0.0) {
            zero_step = Some(0);
            end = 0;
        }
    }
    let mut step = 0u64;
    let mut batch = Vec::with_capacity(cfg.batch_size);
    while step < end {
        let lr = cfg.schedule.rate(cfg.learning_rate, step, epoch_len);
        let h = T::cast(lr);
        let updated = if cfg.batch_size == 1 {
            let (x, target) = draw_example(cfg, &mut rng)?;
            let info = sgd_step(&mut net, &x, &target, cfg.loss, h)?;
            if !info.output.as_slice().iter().all(|v| v.is_finite()) {
                return Err(Error::Diverged {
                    step,
                    detail: format!("non-finite output {:?}", info.output.to_f64_vec()),
                });
            }
            info.updated
        } else {
            batch.clear();
            for _ in 0..cfg.batch_size {
                batch.push(draw_example(cfg, &mut rng)?);
            }
            sgd_batch_step(&mut net, &batch, cfg.loss, h)?
        };
        updates += updated as u64;
        step += 1;
        if let Budget::ZeroTrainErrorThenRepeat { check_every, max_steps } = cfg.budget {
            if zero_step.is_none()
                && step % check_every == 0
                && train_error(&net, &cfg.distribution)? == Some(0.0)
            {
                zero_step = Some(step);
                end = (2 * step).min(max_steps);
            }
        }
        if (cfg.metric_every > 0 && step % cfg.metric_every == 0) || step == end {
            metrics.push(record(&net, cfg, &probe, step, lr)?);
            if step < end && stop(metrics.last().expect("just pushed"), &net) {
                break;
            }
        }
    }
    Ok(RunResult {
        config: cfg.clone(),
        initial,
        network: net,
        metrics,
        steps: step,
        updates,
        zero_train_error_step: zero_step,
        wall_time: start.elapsed(),
    })
}

/// Runs every config on a pool of `parallelism` threads. Results come back
/// in input order and do not depend on `parallelism`. Run failures are
/// reported per run.
pub fn sweep<T: Scalar>(configs: &[TrainConfig<T>], parallelism: usize) -> Result<Vec<Result<RunResult<T>>>> {
    sweep_until(configs, parallelism, |_| |_: &MetricsRecord, _: &Network<T>| false)
}

/// [`sweep`] with a per-run stop rule; `make_stop` builds a fresh predicate
/// for each run, as passed to [`train_until`].
pub fn sweep_until<T, F, S>(configs: &[TrainConfig<T>], parallelism: usize, make_stop: F) -> Result<Vec<Result<RunResult<T>>>>
where
    T: Scalar,
    F: Fn(&TrainConfig<T>) -> S + Sync,
    S: FnMut(&MetricsRecord, &Network<T>) -> bool,
{
    let mut ids: Vec<u64> = configs.iter().map(|c| c.run_id).collect();
    ids.sort_unstable();
    if let Some(w) = ids.windows(2).find(|w| w[0] == w[1]) {
        return Err(Error::InvalidArgument(format!("duplicate run_id {}", w[0])));
    }
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(parallelism.max(1))
        .build()
        .map_err(|e| Error::InvalidArgument(format!("thread pool: {e}")))?;
    Ok(pool.install(|| configs.par_iter().map(|c| train_until(c, make_stop(c))).collect()))
}

/// Mean and standard error over runs.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Stat {
    pub mean: f64,
    /// `None` for a single run.
    pub stderr: Option<f64>,
    pub n: usize,
}

pub fn mean_stderr(values: &[f64]) -> Option<Stat> {
    let n = values.len();
    if n == 0 {
        return None;
    }
    let mean = values.iter().sum::<f64>() / n as f64;
    let stderr = (n > 1).then(|| {
        let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1) as f64;
        (var / n as f64).sqrt()
    });
    Some(Stat { mean, stderr, n })
}

/// Per-step aggregate over runs that share a metric grid.
#[derive(Debug, Clone, PartialEq)]
pub struct AggregateRecord {
    pub step: u64,
    pub total_norm: Stat,
    pub active_train: Option<Stat>,
    pub active_test: Option<Stat>,
    pub err_train: Option<Stat>,
    pub err_test: Option<Stat>,
}

/// Aggregates metrics at the steps recorded by every run, in step order.
/// Runs are reduced in the given order.
pub fn aggregate(runs: &[&[MetricsRecord]]) -> Vec<AggregateRecord> {
    let Some(first) = runs.first() else {
        return Vec::new();
    };
    let at = |run: &[MetricsRecord], step: u64| run.iter().find(|m| m.step == step).cloned();
    first
        .iter()
        .filter_map(|m0| {
            let rows: Vec<MetricsRecord> = runs.iter().map(|r| at(r, m0.step)).collect::<Option<_>>()?;
            let col = |f: &dyn Fn(&MetricsRecord) -> Option<f64>| -> Option<Stat> {
                let v: Vec<f64> = rows.iter().map(f).collect::<Option<_>>()?;
                mean_stderr(&v)
            };
            Some(AggregateRecord {
                step: m0.step,
                total_norm: col(&|m| Some(m.total_weight_norm()))?,
                active_train: col(&|m| m.active_train),
                active_test: col(&|m| m.active_test),
                err_train: col(&|m| m.err_train),
                err_test: col(&|m| m.err_test),
            })
        })
        .collect()
}

/// Final-record aggregate over runs of possibly different lengths.
pub fn aggregate_final<T: Scalar>(runs: &[RunResult<T>]) -> Option<AggregateRecord> {
    let last: Vec<MetricsRecord> = runs
        .iter()
        .map(|r| MetricsRecord {
            step: 0,
            ..r.last_metrics().clone()
        })
        .collect();
    let slices: Vec<&[MetricsRecord]> = last.iter().map(std::slice::from_ref).collect();
    aggregate(&slices).pop()
}
