//! One SGD step on a misclassified sample shrinks every weight layer of a
//! homogeneous network, and shrinks all layers by the same first-order
//! amount.
//!
//! For a network that is positively homogeneous of degree one in each
//! layer, `⟨W_l, ∂N/∂W_l⟩ = N`, so one step changes each layer by
//! `Δ_l = ‖W_l - h g_l‖² - ‖W_l‖² = 2h y L'(-yN) N + h² ‖g_l‖²`.
//! The first term is shared by all layers and negative on a misclassified
//! sample; layers differ only at order `h²`.

use serde::Serialize;

use super::TheoremReport;
use crate::linalg::Vector;
use crate::loss::{backprop, SurrogateLoss, TargetSpec};
use crate::model::{forward, ActivationKind, ArchSpec, ModeKind, Network};
use crate::rng::RngStream;
use crate::train::sgd_step;
use crate::Result;

#[derive(Debug, Clone, Serialize)]
pub struct Thm1Params {
    pub trials: usize,
    pub h: f64,
    pub seed: u64,
    pub depths: Vec<usize>,
    pub activations: Vec<ActivationKind>,
    pub losses: Vec<SurrogateLoss>,
    /// Samples with `|N(x)|` below this are redrawn: the decrease
    /// `2h L' |N|` must dominate the `h²` term at the fixed `h`.
    pub min_margin: f64,
}

impl Default for Thm1Params {
    fn default() -> Self {
        Self {
            trials: 1000,
            h: 1e-5,
            seed: 1,
            depths: vec![1, 2, 3],
            activations: vec![ActivationKind::Relu, ActivationKind::LeakyRelu { alpha: 0.1 }],
            losses: vec![SurrogateLoss::HINGE0, SurrogateLoss::Hinge { beta: 1.0 }, SurrogateLoss::Logistic],
            min_margin: 1e-3,
        }
    }
}

#[derive(Debug, Default, Clone, Serialize)]
struct Evidence {
    instances: usize,
    redrawn_samples: usize,
    layers_checked: usize,
    layers_decreased: usize,
    /// Largest `Δ_l / (2h L' |N|)`; `-1` is the first-order prediction.
    worst_relative_change: f64,
    /// Largest `|Δ_l - Δ_{l+1}| / (h² max_l ‖g_l‖²)`.
    worst_balance_ratio: f64,
    /// Largest deviation of `Δ_l` from `2h y L' N + h² ‖g_l‖²`.
    worst_identity_error: f64,
    one_hidden_layer_inequality_violations: usize,
    failures: Vec<String>,
}

/// Runs `trials` misclassified instances in augmented-input mode, cycling
/// through every (depth, activation, loss) combination.
pub fn check_theorem1(params: &Thm1Params) -> Result<TheoremReport> {
    let mut report = TheoremReport::new("thm1", params);
    let mut ev = Evidence {
        worst_relative_change: f64::NEG_INFINITY,
        ..Default::default()
    };
    let combos: Vec<(usize, ActivationKind, SurrogateLoss)> = params
        .depths
        .iter()
        .flat_map(|&d| {
            params
                .activations
                .iter()
                .flat_map(move |&a| params.losses.iter().map(move |&l| (d, a, l)))
        })
        .collect();
    if combos.is_empty() || params.trials == 0 {
        report.inconclusive("no instances requested");
        return Ok(report.with_evidence(ev));
    }
    let h = params.h;
    for t in 0..params.trials {
        let (depth, act, loss) = combos[t % combos.len()];
        let mut rng = RngStream::new(params.seed, t as u64);
        let d = 2 + rng.draw_index(5)?;
        let hidden: Vec<usize> = (0..depth).map(|_| rng.draw_index(7).map(|w| w + 2)).collect::<Result<_>>()?;
        let spec = ArchSpec {
            input_dim: d,
            hidden,
            output_width: 1,
            activation: act,
            mode: ModeKind::AugmentedInput,
        };
        let net = Network::<f64>::init_uniform(&spec, 1.0, &mut rng)?;
        let mut found = None;
        for _ in 0..1000 {
            let x = Vector::new((0..d).map(|_| rng.draw_gaussian()).collect())?;
            let n = forward(&net, &x)?.output[0];
            if n.abs() >= params.min_margin {
                found = Some((x, n));
                break;
            }
            ev.redrawn_samples += 1;
        }
        let Some((x, n)) = found else {
            continue;
        };
        ev.instances += 1;
        let y = -n.signum();
        let target = TargetSpec::Binary(y);
        let trace = forward(&net, &x)?;
        let grad = backprop(&net, &trace, &target, loss)?;
        let mut after = net.clone();
        sgd_step(&mut after, &x, &target, loss, h)?;
        let lp = loss.deriv(-y * n);
        let first_order = 2.0 * h * y * lp * n;
        let sq = |m: &Network<f64>, l: usize| m.layers()[l].weight.as_slice().iter().map(|v| v * v).sum::<f64>();
        let layers = net.layers().len();
        let mut deltas = Vec::with_capacity(layers);
        let mut gmax: f64 = 0.0;
        for l in 0..layers {
            let delta = sq(&after, l) - sq(&net, l);
            let g2 = grad.weight_norm_squared(l);
            gmax = gmax.max(g2);
            ev.layers_checked += 1;
            if delta < 0.0 {
                ev.layers_decreased += 1;
            } else if ev.failures.len() < 10 {
                ev.failures.push(format!("trial {t} layer {l}: Δ={delta:e}, N={n:e}"));
            }
            ev.worst_relative_change = ev.worst_relative_change.max(delta / first_order.abs());
            ev.worst_identity_error = ev.worst_identity_error.max((delta - (first_order + h * h * g2)).abs());
            deltas.push(delta);
        }
        for w in deltas.windows(2) {
            ev.worst_balance_ratio = ev.worst_balance_ratio.max((w[0] - w[1]).abs() / (h * h * gmax));
        }
        if depth == 1 {
            let v2 = sq(&net, 1);
            let x2 = trace.input.norm_squared();
            let bound = first_order + h * h * lp * lp * v2 * x2;
            if deltas[0] > bound + 1e-12 * (1.0 + sq(&net, 0)) {
                ev.one_hidden_layer_inequality_violations += 1;
            }
        }
    }
    if ev.instances * 2 < params.trials {
        report.inconclusive(format!(
            "only {} of {} trials found a sample with |N| >= {}",
            ev.instances, params.trials, params.min_margin
        ));
        return Ok(report.with_evidence(ev));
    }
    report.check(
        "every layer shrinks",
        ev.layers_decreased == ev.layers_checked,
        format!("{}/{} layers over {} instances", ev.layers_decreased, ev.layers_checked, ev.instances),
    );
    report.check(
        "balancedness",
        ev.worst_balance_ratio <= 10.0,
        format!("max |Δ_l - Δ_l+1| = {:.3} h² max‖g‖² (limit 10)", ev.worst_balance_ratio),
    );
    report.check(
        "one-hidden-layer bound",
        ev.one_hidden_layer_inequality_violations == 0,
        format!("{} violations", ev.one_hidden_layer_inequality_violations),
    );
    Ok(report.with_evidence(ev))
}
