//! Exact `a(p)` for tiny configurations.
//!
//! A run is determined by the sampled indices, a keep/replace bit per step
//! and, for replaced steps, the replacement label. A leaf with `i` kept
//! steps has probability `n^{-T} (1-p)^i (p/|Y|)^{T-i}`, so
//! `a(p) = Σ_i c_i p^{T-i} (1-p)^i` with `c_i` the sum of
//! `n^{-T} |Y|^{-(T-i)} A(leaf)` over leaves with `i` kept steps.
//! `A(leaf)` is an active count divided by `n`, so every `c_i` is rational.

use std::sync::Arc;

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, ToPrimitive, Zero};
use serde::Serialize;

use super::TheoremReport;
use crate::data::{Distribution, Label, LabeledDataset};
use crate::error::{Error, Result};
use crate::loss::SurrogateLoss;
use crate::model::{forward, Network};
use crate::train::{mean_stderr, sgd_step, sweep, target_for, Budget, InitSpec, NoiseSpec, Stat, TrainConfig};

/// Leaves allowed in an exhaustive enumeration.
pub const ENUMERATION_LIMIT: u128 = 10_000_000;

/// Everything that determines a tiny run except `p`.
#[derive(Debug, Clone)]
pub struct TinyConfig {
    pub dataset: Arc<LabeledDataset<f64>>,
    pub initial: Network<f64>,
    pub loss: SurrogateLoss,
    pub h: f64,
    pub steps: usize,
}

impl TinyConfig {
    fn validate(&self) -> Result<()> {
        if self.dataset.is_empty() {
            return Err(Error::Empty("tiny dataset"));
        }
        if self.initial.hidden_layer_count() == 0 {
            return Err(Error::InvalidArgument("a(p) needs a hidden layer".into()));
        }
        if self.dataset.dim() != Some(self.initial.input_dim()) {
            return Err(Error::InvalidArgument("dataset and network dimensions differ".into()));
        }
        let (n, t, y) = (
            self.dataset.len() as u128,
            self.steps as u32,
            self.dataset.label_set.size() as u128,
        );
        let size = n
            .checked_pow(t)
            .and_then(|a| a.checked_mul(2u128.checked_pow(t)?))
            .and_then(|a| a.checked_mul(y.checked_pow(t)?))
            .unwrap_or(u128::MAX);
        if size > ENUMERATION_LIMIT {
            return Err(Error::EnumerationTooLarge {
                size,
                limit: ENUMERATION_LIMIT,
            });
        }
        Ok(())
    }

    /// Same run as a training config with label noise `p`.
    pub fn train_config(&self, p: f64, seed: u64, run_id: u64) -> TrainConfig<f64> {
        TrainConfig {
            init: InitSpec::Given(self.initial.clone()),
            master_seed: seed,
            run_id,
            ..TrainConfig::new(
                Distribution::FixedSet(self.dataset.clone()),
                self.initial.spec(),
                self.loss,
                NoiseSpec::LabelNoise(p),
                self.h,
                Budget::Steps(self.steps as u64),
            )
        }
    }

    /// Total first-hidden-layer activity over the dataset.
    fn active_total(&self, net: &Network<f64>) -> Result<u64> {
        let mut total = 0;
        for x in &self.dataset.inputs {
            let t = forward(net, x)?;
            total += t.preactivations[0].as_slice().iter().filter(|&&z| z > 0.0).count() as u64;
        }
        Ok(total)
    }

    fn step(&self, net: &mut Network<f64>, index: usize, y: Label) -> Result<()> {
        let target = target_for(y, NoiseSpec::None, self.initial.output_width())?;
        sgd_step(net, &self.dataset.inputs[index], &target, self.loss, self.h)?;
        Ok(())
    }
}

/// `a(p)` in the basis `p^{T-i} (1-p)^i` and in monomials `p^j`.
#[derive(Debug, Clone, PartialEq)]
pub struct ApPolynomial {
    /// `basis[i]` multiplies `p^{T-i} (1-p)^i`.
    pub basis: Vec<BigRational>,
    /// `monomial[j]` multiplies `p^j`.
    pub monomial: Vec<BigRational>,
}

fn binomial(n: usize, k: usize) -> BigInt {
    let mut acc = BigInt::one();
    for j in 0..k {
        acc = acc * BigInt::from(n - j) / BigInt::from(j + 1);
    }
    acc
}

impl ApPolynomial {
    pub fn from_basis(basis: Vec<BigRational>) -> Self {
        let t = basis.len() - 1;
        let mut monomial = vec![BigRational::zero(); t + 1];
        for (i, c) in basis.iter().enumerate() {
            // p^{T-i} (1-p)^i = Σ_j C(i, j) (-1)^j p^{T-i+j}
            for j in 0..=i {
                let mut term = c * BigRational::from_integer(binomial(i, j));
                if j % 2 == 1 {
                    term = -term;
                }
                monomial[t - i + j] += term;
            }
        }
        Self { basis, monomial }
    }

    pub fn degree_bound(&self) -> usize {
        self.basis.len() - 1
    }

    pub fn eval_exact(&self, p: &BigRational) -> BigRational {
        let mut acc = BigRational::zero();
        for c in self.monomial.iter().rev() {
            acc = acc * p + c;
        }
        acc
    }

    pub fn eval(&self, p: f64) -> f64 {
        self.monomial
            .iter()
            .rev()
            .fold(0.0, |acc, c| acc * p + c.to_f64().unwrap_or(f64::NAN))
    }

    pub fn at_zero(&self) -> &BigRational {
        self.basis.last().expect("nonempty")
    }

    pub fn at_one(&self) -> &BigRational {
        &self.basis[0]
    }
}

fn ratio(num: u64, den: &BigInt) -> BigRational {
    BigRational::new(BigInt::from(num), den.clone())
}

/// Exhaustive enumeration of every run of the tiny config.
pub fn a_p_exact(cfg: &TinyConfig) -> Result<ApPolynomial> {
    cfg.validate()?;
    let n = cfg.dataset.len();
    let labels = cfg.dataset.label_set.labels();
    let t = cfg.steps;
    // Integer sums per kept-count, weighted by |Y|^{kept} so that each leaf
    // contributes active_total · |Y|^{i} / (n^{T+1} |Y|^T).
    let mut sums = vec![0u64; t + 1];
    let ysz = labels.len() as u64;
    fn walk(
        cfg: &TinyConfig,
        labels: &[Label],
        net: &Network<f64>,
        depth: usize,
        kept: usize,
        sums: &mut [u64],
    ) -> Result<()> {
        if depth == cfg.steps {
            let a = cfg.active_total(net)?;
            sums[kept] += a * (labels.len() as u64).pow(kept as u32);
            return Ok(());
        }
        for idx in 0..cfg.dataset.len() {
            let mut next = net.clone();
            cfg.step(&mut next, idx, cfg.dataset.labels[idx])?;
            walk(cfg, labels, &next, depth + 1, kept + 1, sums)?;
            for &y in labels {
                let mut next = net.clone();
                cfg.step(&mut next, idx, y)?;
                walk(cfg, labels, &next, depth + 1, kept, sums)?;
            }
        }
        Ok(())
    }
    walk(cfg, &labels, &cfg.initial, 0, 0, &mut sums)?;
    let den = BigInt::from(n as u64).pow(t as u32 + 1) * BigInt::from(ysz).pow(t as u32);
    Ok(ApPolynomial::from_basis(sums.iter().map(|&s| ratio(s, &den)).collect()))
}

/// `a(0)` by enumerating index sequences with clean labels.
pub fn direct_clean(cfg: &TinyConfig) -> Result<BigRational> {
    cfg.validate()?;
    let (n, t) = (cfg.dataset.len(), cfg.steps);
    let mut total = 0u64;
    for code in 0..n.pow(t as u32) {
        let mut net = cfg.initial.clone();
        let mut c = code;
        for _ in 0..t {
            let idx = c % n;
            c /= n;
            cfg.step(&mut net, idx, cfg.dataset.labels[idx])?;
        }
        total += cfg.active_total(&net)?;
    }
    Ok(ratio(total, &BigInt::from(n as u64).pow(t as u32 + 1)))
}

/// `a(1)` by enumerating index sequences and uniformly drawn labels.
pub fn direct_pure_noise(cfg: &TinyConfig) -> Result<BigRational> {
    cfg.validate()?;
    let labels = cfg.dataset.label_set.labels();
    let (n, t, m) = (cfg.dataset.len(), cfg.steps, labels.len());
    let mut total = 0u64;
    for code in 0..(n * m).pow(t as u32) {
        let mut net = cfg.initial.clone();
        let mut c = code;
        for _ in 0..t {
            let (idx, y) = (c % n, labels[(c / n) % m]);
            c /= n * m;
            cfg.step(&mut net, idx, y)?;
        }
        total += cfg.active_total(&net)?;
    }
    let den = BigInt::from(n as u64).pow(t as u32 + 1) * BigInt::from(m as u64).pow(t as u32);
    Ok(ratio(total, &den))
}

/// Monte Carlo `a(p)` over `runs` training runs of `template` with label
/// noise `p`: final typical activity on the training set (or the probe
/// inputs).
pub fn a_p_curve(
    template: &TrainConfig<f64>,
    p_grid: &[f64],
    runs: usize,
    parallelism: usize,
) -> Result<Vec<(f64, Stat)>> {
    let mut out = Vec::with_capacity(p_grid.len());
    for &p in p_grid {
        if !(0.0..=1.0).contains(&p) {
            return Err(Error::InvalidArgument(format!("noise level {p} outside [0, 1]")));
        }
        let configs: Vec<TrainConfig<f64>> = (0..runs as u64)
            .map(|r| TrainConfig {
                noise: NoiseSpec::LabelNoise(p),
                run_id: r,
                metric_every: 0,
                ..template.clone()
            })
            .collect();
        let mut values = Vec::with_capacity(runs);
        for res in sweep(&configs, parallelism)? {
            let res = res?;
            values.push(
                res.last_metrics()
                    .active_train
                    .ok_or_else(|| Error::InvalidArgument("template has no hidden layer".into()))?,
            );
        }
        let stat = mean_stderr(&values).ok_or(Error::Empty("a(p) runs"))?;
        out.push((p, stat));
    }
    Ok(out)
}

/// Sign of the least-squares slope of the curve: a trend report only.
pub fn trend(curve: &[(f64, Stat)]) -> f64 {
    let n = curve.len() as f64;
    if curve.len() < 2 {
        return 0.0;
    }
    let mx = curve.iter().map(|c| c.0).sum::<f64>() / n;
    let my = curve.iter().map(|c| c.1.mean).sum::<f64>() / n;
    let sxy: f64 = curve.iter().map(|c| (c.0 - mx) * (c.1.mean - my)).sum();
    let sxx: f64 = curve.iter().map(|c| (c.0 - mx).powi(2)).sum();
    if sxx == 0.0 {
        0.0
    } else {
        sxy / sxx
    }
}

#[derive(Debug, Clone, Serialize)]
struct ApEvidence {
    basis: Vec<String>,
    monomial: Vec<String>,
    direct_a0: String,
    direct_a1: String,
    monte_carlo: Vec<McPoint>,
}

#[derive(Debug, Clone, Serialize)]
struct McPoint {
    p: f64,
    exact: f64,
    mean: f64,
    stderr: Option<f64>,
    runs: usize,
}

/// Enumeration against direct evaluation at the endpoints and against
/// Monte Carlo training runs at each `p`.
pub fn check_a_p(cfg: &TinyConfig, p_grid: &[f64], runs: usize, seed: u64, parallelism: usize) -> Result<TheoremReport> {
    let mut report = TheoremReport::new(
        "ap-exact",
        serde_json::json!({
            "n": cfg.dataset.len(),
            "steps": cfg.steps,
            "h": cfg.h,
            "loss": cfg.loss,
            "p_grid": p_grid,
            "runs": runs,
            "seed": seed,
        }),
    );
    let poly = a_p_exact(cfg)?;
    let (a0, a1) = (direct_clean(cfg)?, direct_pure_noise(cfg)?);
    report.check(
        "a(0) equals clean enumeration",
        poly.at_zero() == &a0 && poly.eval_exact(&BigRational::zero()) == a0,
        format!("{} vs {a0}", poly.at_zero()),
    );
    report.check(
        "a(1) equals pure-noise enumeration",
        poly.at_one() == &a1 && poly.eval_exact(&BigRational::one()) == a1,
        format!("{} vs {a1}", poly.at_one()),
    );
    let mut points = Vec::new();
    for &p in p_grid {
        let template = cfg.train_config(p, seed, 0);
        let (_, stat) = a_p_curve(&template, &[p], runs, parallelism)?.remove(0);
        let exact = poly.eval(p);
        let ok = match stat.stderr {
            Some(se) if se > 0.0 => (stat.mean - exact).abs() <= 3.0 * se,
            // Zero spread: every run must agree with the exact value.
            _ => (stat.mean - exact).abs() <= 1e-12,
        };
        report.check(
            &format!("Monte Carlo at p = {p}"),
            ok,
            format!("{:.5} ± {:.5} vs exact {exact:.5}", stat.mean, stat.stderr.unwrap_or(0.0)),
        );
        points.push(McPoint {
            p,
            exact,
            mean: stat.mean,
            stderr: stat.stderr,
            runs: stat.n,
        });
    }
    let ev = ApEvidence {
        basis: poly.basis.iter().map(ToString::to_string).collect(),
        monomial: poly.monomial.iter().map(ToString::to_string).collect(),
        direct_a0: a0.to_string(),
        direct_a1: a1.to_string(),
        monte_carlo: points,
    };
    Ok(report.with_evidence(ev))
}

/// The reference tiny configuration: two points in the plane, one hidden
/// ReLU neuron with bias, hinge loss at `β = 1`, `h = 0.5`.
pub fn default_tiny(steps: usize) -> Result<TinyConfig> {
    use crate::data::LabelSet;
    use crate::linalg::{Matrix, Vector};
    use crate::model::{ActivationKind, ArchMode, Layer};
    let ds = LabeledDataset::new(
        "tiny",
        vec![Vector::from_f64(&[1.0, 0.5])?, Vector::from_f64(&[-0.5, 1.0])?],
        vec![Label::POS, Label::NEG],
        LabelSet::Binary,
    )?;
    let net = Network::new(
        vec![
            Layer {
                weight: Matrix::from_rows(&[vec![0.6, 0.3]])?,
                bias: Some(Vector::from_f64(&[0.1])?),
            },
            Layer {
                weight: Matrix::from_rows(&[vec![0.8]])?,
                bias: Some(Vector::from_f64(&[0.0])?),
            },
        ],
        ActivationKind::Relu,
        ArchMode::WithBias,
    )?;
    Ok(TinyConfig {
        dataset: Arc::new(ds),
        initial: net,
        loss: SurrogateLoss::Hinge { beta: 1.0 },
        h: 0.5,
        steps,
    })
}
