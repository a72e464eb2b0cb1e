//! A single neuron `N(x) = V·x` under pure label noise with `x ~ N(0, I_d)`.
//!
//! With `z = V·x ~ N(0, σ²)`, one step changes the squared norm by
//! `2h y L'(-yz) z + h² L'(-yz)² ‖x‖²`. The expected first-order term is
//! `2h r_L(σ)` with `r_L(σ) = E[½ z (L'(-z) - L'(z))] < 0`, so the norm
//! drifts down by about `h |r_L(σ)| / σ` per step until the `h²` term
//! balances it.

use serde::Serialize;
use statrs::function::erf::erf;

use super::TheoremReport;
use crate::data::Distribution;
use crate::error::{Error, Result};
use crate::linalg::Matrix;
use crate::loss::SurrogateLoss;
use crate::model::{ActivationKind, ArchMode, ArchSpec, Layer, ModeKind, Network};
use crate::rng::{stream_id, RngStream};
use crate::train::{draw_example, sgd_step, Budget, InitSpec, NoiseSpec, TrainConfig, TAG_INIT, TAG_SGD};

const SQRT_2PI: f64 = 2.506_628_274_631_000_5;

/// `r = -σ/√(2π) exp(-μ²/2σ²) - (μ/2) erf(μ/(√2 σ))`: the expected value of
/// `y (W·x̃) 1{y (W·x̃) < 0}` when `W·x̃ ~ N(μ, σ²)` and `y` is a fair sign.
pub fn expected_decay_rate(sigma: f64, mu: f64) -> Result<f64> {
    if !(sigma > 0.0 && sigma.is_finite() && mu.is_finite()) {
        return Err(Error::InvalidArgument(format!(
            "decay rate needs sigma > 0 and finite mu, got ({sigma}, {mu})"
        )));
    }
    Ok(-sigma / SQRT_2PI * (-mu * mu / (2.0 * sigma * sigma)).exp()
        - mu / 2.0 * erf(mu / (std::f64::consts::SQRT_2 * sigma)))
}

/// Branch constant for `|μ| <= σ`: `e^{-1/2} / (2√(2π))`.
pub fn decay_c1() -> f64 {
    (-0.5f64).exp() / (2.0 * SQRT_2PI)
}

/// Branch constant for `|μ| >= σ`: `erf(1/√2) / 4`.
pub fn decay_c2() -> f64 {
    erf(std::f64::consts::FRAC_1_SQRT_2) / 4.0
}

/// `C = min(c1, c2)`, so that `r < -C √(σ² + μ²)`.
pub fn decay_constant() -> f64 {
    decay_c1().min(decay_c2())
}

/// `r_L(σ) = E_{z ~ N(0, σ²)}[½ z (L'(-z) - L'(z))]` by composite Simpson
/// quadrature on `[-12σ, 12σ]` (a node sits on every kink at 0).
pub fn loss_decay_rate(loss: SurrogateLoss, sigma: f64) -> Result<f64> {
    if !(sigma > 0.0 && sigma.is_finite()) {
        return Err(Error::InvalidArgument(format!("sigma must be positive, got {sigma}")));
    }
    let n = 24_000usize;
    let (a, b) = (-12.0 * sigma, 12.0 * sigma);
    let step = (b - a) / n as f64;
    let f = |z: f64| {
        let dens = (-z * z / (2.0 * sigma * sigma)).exp() / (sigma * SQRT_2PI);
        0.5 * z * (loss.deriv(-z) - loss.deriv(z)) * dens
    };
    let mut acc = f(a) + f(b);
    for i in 1..n {
        let w = if i % 2 == 1 { 4.0 } else { 2.0 };
        acc += w * f(a + i as f64 * step);
    }
    Ok(acc * step / 3.0)
}

/// The closed form against a Monte Carlo mean over `draws` samples (within
/// four standard errors), and the bound `r < -C √(σ² + μ²)`.
pub fn check_decay_rate(sigma: f64, mu: f64, draws: usize, seed: u64) -> Result<TheoremReport> {
    let r = expected_decay_rate(sigma, mu)?;
    if draws < 2 {
        return Err(Error::InvalidArgument(format!("need at least 2 draws, got {draws}")));
    }
    let mut report = TheoremReport::new(
        "decay-rate",
        serde_json::json!({ "sigma": sigma, "mu": mu, "draws": draws, "seed": seed }),
    );
    let mut rng = RngStream::new(seed, 0);
    let (mut s, mut s2) = (0.0, 0.0);
    for _ in 0..draws {
        let z = mu + sigma * rng.draw_gaussian();
        let y = if rng.draw_bernoulli(0.5) { 1.0 } else { -1.0 };
        let v = if y * z < 0.0 { y * z } else { 0.0 };
        s += v;
        s2 += v * v;
    }
    let n = draws as f64;
    let mean = s / n;
    let se = ((s2 / n - mean * mean).max(0.0) / (n - 1.0)).sqrt();
    report.check(
        "closed form matches Monte Carlo",
        (mean - r).abs() <= 4.0 * se,
        format!("{r:.6} vs {mean:.6} ± {se:.6}"),
    );
    let bound = -decay_constant() * sigma.hypot(mu);
    report.check("below -C·sqrt(σ² + μ²)", r < bound, format!("{r:.6} < {bound:.6}"));
    Ok(report.with_evidence(serde_json::json!({
        "closed_form": r,
        "monte_carlo": mean,
        "stderr": se,
        "bound": bound,
        "c1": decay_c1(),
        "c2": decay_c2(),
    })))
}

#[derive(Debug, Clone, Serialize)]
pub struct Thm2Params {
    pub d: usize,
    pub h: f64,
    pub loss: SurrogateLoss,
    /// `‖V^{(0)}‖`; the direction is uniform on the sphere.
    pub initial_norm: f64,
    pub runs: usize,
    /// Runs that must reach the floor.
    pub required: usize,
    pub seed: u64,
    /// `K` in the floor `K d h max(M²/m, 1)` (or `K d √h ...` for a smooth kink).
    pub floor_factor: f64,
    /// `c` in the budget `c ‖V^{(0)}‖ / (m h)` (or `c ‖V^{(0)}‖ / (m d h^{3/2})`).
    pub budget_factor: f64,
    /// Allowed ratio between measured and predicted mean decrement.
    pub decrement_factor: f64,
}

impl Thm2Params {
    pub fn new(d: usize, h: f64, loss: SurrogateLoss) -> Self {
        Self {
            d,
            h,
            loss,
            initial_norm: (d as f64).sqrt(),
            runs: 20,
            required: 18,
            seed: 1,
            floor_factor: 100.0,
            budget_factor: 5.0,
            decrement_factor: 4.0,
        }
    }

    /// Hinge kinks give the `d h` floor; smooth losses the `d √h` floor.
    pub fn floor(&self) -> f64 {
        let (big_m, m) = (self.loss.max_slope(), self.loss.kink_gap());
        let scale = (big_m * big_m / m).max(1.0);
        match self.loss {
            SurrogateLoss::Hinge { .. } => self.floor_factor * self.d as f64 * self.h * scale,
            SurrogateLoss::Logistic => self.floor_factor * self.d as f64 * self.h.sqrt() * scale,
        }
    }

    pub fn budget(&self) -> u64 {
        let m = self.loss.kink_gap();
        let t = match self.loss {
            SurrogateLoss::Hinge { .. } => self.budget_factor * self.initial_norm / (m * self.h),
            SurrogateLoss::Logistic => {
                self.budget_factor * self.initial_norm / (m * self.d as f64 * self.h.powf(1.5))
            }
        };
        t.ceil() as u64
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct Thm2Run {
    pub run: usize,
    pub initial_norm: f64,
    /// First step with `‖V‖` below the floor.
    pub floor_step: Option<u64>,
    /// Mean of `‖V_{t+1}‖ - ‖V_t‖` before the floor (or over the whole run).
    pub mean_decrement: Option<f64>,
    /// Mean of `h |r_L(‖V_t‖)| / ‖V_t‖` over the same steps.
    pub predicted_decrement: Option<f64>,
    /// Mean norm over the last fifth of the run.
    pub tail_norm: f64,
    /// Norms every `budget / 200` steps.
    pub trajectory: Vec<(u64, f64)>,
}

#[derive(Debug, Clone, Serialize)]
struct Evidence {
    floor: f64,
    budget: u64,
    predicted_equilibrium_hinge: f64,
    runs: Vec<Thm2Run>,
}

fn run_one(p: &Thm2Params, run: usize) -> Result<Thm2Run> {
    let mut init = RngStream::new(p.seed, stream_id(run as u64, TAG_INIT));
    let dir: Vec<f64> = (0..p.d).map(|_| init.draw_gaussian()).collect();
    let len = dir.iter().map(|v| v * v).sum::<f64>().sqrt();
    let v0: Vec<f64> = dir.iter().map(|v| v * p.initial_norm / len).collect();
    let net = Network::new(
        vec![Layer {
            weight: Matrix::new(1, p.d, v0)?,
            bias: None,
        }],
        ActivationKind::Relu,
        ArchMode::Plain,
    )?;
    let arch = ArchSpec {
        input_dim: p.d,
        hidden: vec![],
        output_width: 1,
        activation: ActivationKind::Relu,
        mode: ModeKind::Plain,
    };
    let budget = p.budget();
    let cfg = TrainConfig {
        init: InitSpec::Given(net.clone()),
        run_id: run as u64,
        master_seed: p.seed,
        ..TrainConfig::new(
            Distribution::Gaussian { d: p.d },
            arch,
            p.loss,
            NoiseSpec::PureNoise,
            p.h,
            Budget::Steps(budget),
        )
    };
    let mut rng = RngStream::new(p.seed, stream_id(run as u64, TAG_SGD));
    let mut net = net;
    let norm = |n: &Network<f64>| n.layers()[0].weight.frobenius_norm();
    let floor = p.floor();
    let start = norm(&net);
    let mut current = start;
    let mut floor_step = (start < floor).then_some(0);
    let mut predicted_sum = 0.0;
    let every = (budget / 200).max(1);
    let mut trajectory = vec![(0, start)];
    let tail_from = budget - budget / 5;
    let (mut tail_sum, mut tail_n) = (0.0, 0u64);
    for t in 0..budget {
        if floor_step.is_none() {
            predicted_sum += p.h * loss_decay_rate(p.loss, current.max(1e-300))?.abs() / current;
        }
        let (x, target) = draw_example(&cfg, &mut rng)?;
        sgd_step(&mut net, &x, &target, p.loss, p.h)?;
        current = norm(&net);
        let step = t + 1;
        if floor_step.is_none() && current < floor {
            floor_step = Some(step);
        }
        if step % every == 0 {
            trajectory.push((step, current));
        }
        if step > tail_from {
            tail_sum += current;
            tail_n += 1;
        }
    }
    let measured_steps = floor_step.unwrap_or(budget);
    let (mean_decrement, predicted_decrement) = if measured_steps == 0 {
        (None, None)
    } else {
        let end = match floor_step {
            Some(s) => trajectory_norm_at(&cfg, p, s)?,
            None => current,
        };
        (
            Some((end - start) / measured_steps as f64),
            Some(predicted_sum / measured_steps as f64),
        )
    };
    Ok(Thm2Run {
        run,
        initial_norm: start,
        floor_step,
        mean_decrement,
        predicted_decrement,
        tail_norm: if tail_n > 0 { tail_sum / tail_n as f64 } else { current },
        trajectory,
    })
}

/// Norm after exactly `steps` steps, by replaying the run.
fn trajectory_norm_at(cfg: &TrainConfig<f64>, p: &Thm2Params, steps: u64) -> Result<f64> {
    let InitSpec::Given(mut net) = cfg.init.clone() else {
        unreachable!("theorem-2 runs use an explicit initial neuron")
    };
    let mut rng = RngStream::new(cfg.master_seed, stream_id(cfg.run_id, TAG_SGD));
    for _ in 0..steps {
        let (x, target) = draw_example(cfg, &mut rng)?;
        sgd_step(&mut net, &x, &target, p.loss, p.h)?;
    }
    Ok(net.layers()[0].weight.frobenius_norm())
}

/// Runs the single-neuron experiment `runs` times and checks the floor,
/// the budget and the measured drift against `r_L`.
pub fn check_theorem2(p: &Thm2Params) -> Result<TheoremReport> {
    if p.d == 0 || !(p.h > 0.0) || !(p.initial_norm > 0.0) || p.runs == 0 {
        return Err(Error::InvalidArgument(format!("bad theorem-2 parameters {p:?}")));
    }
    p.loss.validate()?;
    let mut report = TheoremReport::new("thm2", p);
    let runs: Vec<Thm2Run> = (0..p.runs).map(|r| run_one(p, r)).collect::<Result<_>>()?;
    let reached = runs.iter().filter(|r| r.floor_step.is_some()).count();
    report.check(
        "floor reached within budget",
        reached >= p.required.min(p.runs),
        format!(
            "{reached}/{} runs below {:.4} within {} steps (need {})",
            p.runs,
            p.floor(),
            p.budget(),
            p.required.min(p.runs)
        ),
    );
    let mut neg = 0;
    let mut within = 0;
    let mut measured = 0;
    let mut worst: f64 = 1.0;
    for r in &runs {
        if let (Some(m), Some(pred)) = (r.mean_decrement, r.predicted_decrement) {
            measured += 1;
            if m < 0.0 {
                neg += 1;
                let ratio = -m / pred;
                let off = ratio.max(1.0 / ratio);
                worst = worst.max(off);
                if off <= p.decrement_factor {
                    within += 1;
                }
            }
        }
    }
    report.check(
        "pre-floor drift is negative",
        neg == measured,
        format!("{neg}/{measured} runs"),
    );
    report.check(
        "drift matches the expected rate",
        within == measured,
        format!(
            "{within}/{measured} runs within {}x (worst {:.3}x)",
            p.decrement_factor, worst
        ),
    );
    let ev = Evidence {
        floor: p.floor(),
        budget: p.budget(),
        predicted_equilibrium_hinge: SQRT_2PI * p.d as f64 * p.h / 4.0,
        runs,
    };
    Ok(report.with_evidence(ev))
}
