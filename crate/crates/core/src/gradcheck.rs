//! Central finite differences against [`backprop`], over random networks,
//! inputs, targets and losses.
//!
//! Cases whose preactivations or hinge arguments sit within `margin` of a
//! kink are redrawn: there the loss is not differentiable and the two
//! one-sided quotients disagree by construction.

use serde::Serialize;

use crate::error::Result;
use crate::linalg::Vector;
use crate::loss::{backprop, sample_loss, SurrogateLoss, TargetSpec};
use crate::model::{forward, ActivationKind, ArchSpec, ModeKind, Network};
use crate::rng::RngStream;

#[derive(Debug, Clone)]
pub struct GradCase {
    pub net: Network<f64>,
    pub x: Vector<f64>,
    pub target: TargetSpec,
    pub loss: SurrogateLoss,
}

#[derive(Debug, Clone, Serialize)]
pub struct GradResult {
    pub description: String,
    pub parameters: usize,
    /// `‖fd - bp‖ / max(‖fd‖, ‖bp‖)`, or 0 when both vanish.
    pub relative_error: f64,
    pub smoothed: bool,
}

fn kink_distance(case: &GradCase) -> Result<f64> {
    let t = forward(&case.net, &case.x)?;
    let mut dist = f64::INFINITY;
    if case.net.activation() != ActivationKind::Identity {
        for z in &t.preactivations {
            for &v in z.as_slice() {
                dist = dist.min(v.abs());
            }
        }
    }
    if let SurrogateLoss::Hinge { beta } = case.loss {
        let out = t.output.as_slice();
        let ys: Vec<f64> = match &case.target {
            TargetSpec::Binary(y) => vec![*y],
            TargetSpec::MultiLabel(y) => y.clone(),
            TargetSpec::Smoothed { .. } => vec![],
        };
        for (y, &n) in ys.iter().zip(out) {
            dist = dist.min((beta - y * n).abs());
        }
    }
    Ok(dist)
}

/// A random case at least `margin` away from every kink.
pub fn random_case(rng: &mut RngStream, margin: f64) -> Result<GradCase> {
    loop {
        let mode = [
            ModeKind::WithBias,
            ModeKind::AugmentedInput,
            ModeKind::Plain,
            ModeKind::FixedTopLayer,
        ][rng.draw_index(4)?];
        let activation = [
            ActivationKind::Relu,
            ActivationKind::LeakyRelu { alpha: 0.1 },
            ActivationKind::Identity,
        ][rng.draw_index(3)?];
        let d = 1 + rng.draw_index(5)?;
        let (hidden, width) = if mode == ModeKind::FixedTopLayer {
            (vec![2 * (1 + rng.draw_index(3)?)], 1)
        } else {
            let depth = 1 + rng.draw_index(3)?;
            let hidden = (0..depth).map(|_| rng.draw_index(6).map(|w| w + 1)).collect::<Result<_>>()?;
            (hidden, [1, 3][rng.draw_index(2)?])
        };
        let spec = ArchSpec {
            input_dim: d,
            hidden,
            output_width: width,
            activation,
            mode,
        };
        let net = Network::init_uniform(&spec, 1.0, rng)?;
        let x = Vector::new((0..d).map(|_| rng.draw_gaussian()).collect())?;
        let loss = [
            SurrogateLoss::HINGE0,
            SurrogateLoss::Hinge { beta: 1.0 },
            SurrogateLoss::Logistic,
        ][rng.draw_index(3)?];
        let target = if width == 1 {
            TargetSpec::Binary(if rng.draw_bernoulli(0.5) { 1.0 } else { -1.0 })
        } else if rng.draw_bernoulli(0.5) {
            TargetSpec::one_vs_rest(rng.draw_index(width)?, width)?
        } else {
            TargetSpec::Smoothed {
                p: rng.draw_unit(),
                true_class: rng.draw_index(width)?,
            }
        };
        let case = GradCase { net, x, target, loss };
        if kink_distance(&case)? >= margin {
            return Ok(case);
        }
    }
}

fn loss_at(case: &GradCase, net: &Network<f64>) -> Result<f64> {
    let t = forward(net, &case.x)?;
    sample_loss(t.output.as_slice(), &case.target, case.loss)
}

/// Compares every weight and bias derivative with a central difference of
/// step `eps`.
pub fn check_case(case: &GradCase, eps: f64) -> Result<GradResult> {
    let trace = forward(&case.net, &case.x)?;
    let grad = backprop(&case.net, &trace, &case.target, case.loss)?;
    let mut analytic = Vec::new();
    let mut numeric = Vec::new();
    let mut net = case.net.clone();
    for (l, g) in grad.layers.iter().enumerate() {
        let n = net.weights_mut(l).len();
        for i in 0..n {
            let orig = net.weights_mut(l)[i];
            net.weights_mut(l)[i] = orig + eps;
            let up = loss_at(case, &net)?;
            net.weights_mut(l)[i] = orig - eps;
            let down = loss_at(case, &net)?;
            net.weights_mut(l)[i] = orig;
            numeric.push((up - down) / (2.0 * eps));
            analytic.push(g.weight.as_slice()[i]);
        }
        if let Some(b) = &g.bias {
            for i in 0..b.len() {
                let orig = net.bias_mut(l).expect("bias")[i];
                net.bias_mut(l).expect("bias")[i] = orig + eps;
                let up = loss_at(case, &net)?;
                net.bias_mut(l).expect("bias")[i] = orig - eps;
                let down = loss_at(case, &net)?;
                net.bias_mut(l).expect("bias")[i] = orig;
                numeric.push((up - down) / (2.0 * eps));
                analytic.push(b.as_slice()[i]);
            }
        }
    }
    let norm = |v: &[f64]| v.iter().map(|x| x * x).sum::<f64>().sqrt();
    let diff: Vec<f64> = numeric.iter().zip(&analytic).map(|(a, b)| a - b).collect();
    let scale = norm(&numeric).max(norm(&analytic));
    let relative_error = if scale < 1e-12 { norm(&diff) } else { norm(&diff) / scale };
    Ok(GradResult {
        description: format!(
            "{:?} {:?} {:?} {:?} {:?}",
            case.net.spec().mode,
            case.net.spec().hidden,
            case.net.activation(),
            case.loss,
            case.target
        ),
        parameters: analytic.len(),
        relative_error,
        smoothed: matches!(case.target, TargetSpec::Smoothed { .. }),
    })
}

/// `count` random cases from `seed`; each result carries its own error.
pub fn run_suite(count: usize, seed: u64) -> Result<Vec<GradResult>> {
    let mut rng = RngStream::new(seed, 0);
    (0..count)
        .map(|_| random_case(&mut rng, 1e-3).and_then(|c| check_case(&c, 1e-6)))
        .collect()
}

/// The pass threshold for one result.
pub fn tolerance(r: &GradResult) -> f64 {
    if r.smoothed {
        1e-3
    } else {
        1e-4
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::Matrix;
    use crate::model::{ArchMode, Layer};

    #[test]
    fn random_cases_agree() {
        for r in run_suite(60, 11).unwrap() {
            assert!(r.relative_error <= tolerance(&r), "{r:?}");
        }
    }

    #[test]
    fn a_case_on_the_kink_disagrees() {
        // z = 0 exactly: backprop uses ReLU'(0) = 0, the central difference
        // sees half the right slope.
        let layer = |w: f64| Layer {
            weight: Matrix::from_rows(&[vec![w]]).unwrap(),
            bias: Some(Vector::zeros(1)),
        };
        let net = Network::new(vec![layer(0.0), layer(1.0)], ActivationKind::Relu, ArchMode::WithBias).unwrap();
        let case = GradCase {
            net,
            x: Vector::from_f64(&[1.0]).unwrap(),
            target: TargetSpec::Binary(1.0),
            loss: SurrogateLoss::Logistic,
        };
        assert_eq!(kink_distance(&case).unwrap(), 0.0);
        assert!(check_case(&case, 1e-6).unwrap().relative_error > 0.1);
    }
}
