//! Surrogate losses, training targets and exact backpropagation.
//!
//! Binary tasks use `L(-y N(x))` with `y = ±1`. The ten-output task sums the
//! surrogate over coordinates against a ±1 target vector. The smoothed target
//! uses softmax cross-entropy against `(1 - p + p/K, p/K, ..)`.
//!
//! Kinks take the right derivative: `Hinge(β)'(−β) = 1`.

use serde::{Deserialize, Serialize};

use crate::error::{shape_err, Error, Result};
use crate::linalg::{Matrix, Vector};
use crate::model::{ArchMode, ForwardTrace, Network};
use crate::scalar::Scalar;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum SurrogateLoss {
    /// `L(ξ) = max(0, β + ξ)`.
    Hinge { beta: f64 },
    /// `L(ξ) = ln(1 + e^ξ)`.
    Logistic,
}

impl SurrogateLoss {
    pub const HINGE0: Self = Self::Hinge { beta: 0.0 };

    pub fn value<T: Scalar>(self, xi: T) -> T {
        match self {
            Self::Hinge { beta } => (T::cast(beta) + xi).max(T::zero()),
            Self::Logistic => {
                if xi > T::zero() {
                    xi + (-xi).exp().ln_1p()
                } else {
                    xi.exp().ln_1p()
                }
            }
        }
    }

    pub fn deriv<T: Scalar>(self, xi: T) -> T {
        match self {
            Self::Hinge { beta } => {
                if T::cast(beta) + xi >= T::zero() {
                    T::one()
                } else {
                    T::zero()
                }
            }
            Self::Logistic => sigmoid(xi),
        }
    }

    /// `sup L'`.
    pub fn max_slope(self) -> f64 {
        1.0
    }

    /// Jump of `L'` at the kink (hinge) or `L''(0)` (logistic).
    pub fn kink_gap(self) -> f64 {
        match self {
            Self::Hinge { .. } => 1.0,
            Self::Logistic => 0.25,
        }
    }

    /// Location of the non-differentiable point, if any.
    pub fn kink(self) -> Option<f64> {
        match self {
            Self::Hinge { beta } => Some(-beta),
            Self::Logistic => None,
        }
    }

    pub fn validate(self) -> Result<()> {
        match self {
            Self::Hinge { beta } if !(beta >= 0.0 && beta.is_finite()) => Err(
                Error::InvalidArgument(format!("hinge parameter must be >= 0, got {beta}")),
            ),
            _ => Ok(()),
        }
    }
}

fn sigmoid<T: Scalar>(x: T) -> T {
    if x >= T::zero() {
        T::one() / (T::one() + (-x).exp())
    } else {
        let e = x.exp();
        e / (T::one() + e)
    }
}

/// What one SGD step is trained against.
#[derive(Debug, Clone, PartialEq)]
pub enum TargetSpec {
    /// Label `y ∈ {+1, -1}` for a width-1 output.
    Binary(f64),
    /// ±1 vector with exactly one `+1`; the loss is summed per coordinate.
    MultiLabel(Vec<f64>),
    /// Softmax cross-entropy against the smoothed distribution.
    Smoothed { p: f64, true_class: usize },
}

impl TargetSpec {
    pub fn binary(y: f64) -> Result<Self> {
        if y != 1.0 && y != -1.0 {
            return Err(Error::InvalidArgument(format!("binary label must be ±1, got {y}")));
        }
        Ok(Self::Binary(y))
    }

    /// ±1 encoding of `class` among `classes` outputs.
    pub fn one_vs_rest(class: usize, classes: usize) -> Result<Self> {
        if class >= classes {
            return Err(Error::IndexOutOfRange {
                what: "classes",
                index: class,
                len: classes,
            });
        }
        Ok(Self::MultiLabel(
            (0..classes)
                .map(|c| if c == class { 1.0 } else { -1.0 })
                .collect(),
        ))
    }

    /// The smoothed target distribution over `classes` outputs.
    pub fn smoothed_distribution(p: f64, true_class: usize, classes: usize) -> Vec<f64> {
        let base = p / classes as f64;
        (0..classes)
            .map(|c| if c == true_class { 1.0 - p + base } else { base })
            .collect()
    }

    fn check_width(&self, width: usize) -> Result<()> {
        let ok = match self {
            Self::Binary(_) => width == 1,
            Self::MultiLabel(y) => y.len() == width,
            Self::Smoothed { true_class, p } => *true_class < width && (0.0..=1.0).contains(p),
        };
        if ok {
            Ok(())
        } else {
            Err(shape_err("target vs output", format!("{self:?}"), format!("output width {width}")))
        }
    }
}

/// Scalar loss of one sample given the network output.
pub fn sample_loss<T: Scalar>(output: &[T], target: &TargetSpec, loss: SurrogateLoss) -> Result<f64> {
    target.check_width(output.len())?;
    let out: Vec<f64> = output.iter().map(|x| x.as_f64()).collect();
    Ok(match target {
        TargetSpec::Binary(y) => loss.value(-y * out[0]),
        TargetSpec::MultiLabel(y) => y
            .iter()
            .zip(&out)
            .map(|(&yi, &ni)| loss.value(-yi * ni))
            .sum(),
        TargetSpec::Smoothed { p, true_class } => {
            let q = TargetSpec::smoothed_distribution(*p, *true_class, out.len());
            let log_p = log_softmax(&out);
            -q.iter().zip(&log_p).map(|(a, b)| a * b).sum::<f64>()
        }
    })
}

fn log_softmax(z: &[f64]) -> Vec<f64> {
    let max = z.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let lse = z.iter().map(|&v| (v - max).exp()).sum::<f64>().ln() + max;
    z.iter().map(|&v| v - lse).collect()
}

/// Derivative of the sample loss with respect to each network output.
pub fn output_gradient<T: Scalar>(output: &[T], target: &TargetSpec, loss: SurrogateLoss) -> Result<Vec<T>> {
    target.check_width(output.len())?;
    Ok(match target {
        TargetSpec::Binary(y) => {
            let y = T::cast(*y);
            vec![-y * loss.deriv(-y * output[0])]
        }
        TargetSpec::MultiLabel(ys) => ys
            .iter()
            .zip(output)
            .map(|(&y, &n)| {
                let y = T::cast(y);
                -y * loss.deriv(-y * n)
            })
            .collect(),
        TargetSpec::Smoothed { p, true_class } => {
            let q = TargetSpec::smoothed_distribution(*p, *true_class, output.len());
            let max = output.iter().cloned().fold(T::neg_infinity(), T::max);
            let e: Vec<T> = output.iter().map(|&v| (v - max).exp()).collect();
            let s = e.iter().fold(T::zero(), |a, &b| a + b);
            e.iter().zip(&q).map(|(&ei, &qi)| ei / s - T::cast(qi)).collect()
        }
    })
}

/// Per-layer preactivation gradients `δ_l = ∂loss/∂z_l`, one per trainable
/// layer (hidden layers first, then the output layer unless it is frozen).
pub(crate) fn layer_deltas<T: Scalar>(
    net: &Network<T>,
    trace: &ForwardTrace<T>,
    dout: &[T],
) -> Result<Vec<Vec<T>>> {
    let layers = net.layers();
    let hidden = net.hidden_layer_count();
    let act = net.activation();
    let mut deltas: Vec<Vec<T>> = vec![Vec::new(); layers.len()];
    // Gradient with respect to the last hidden activation.
    let mut upstream: Vec<T> = match net.mode() {
        ArchMode::FixedTopLayer { top } => top.as_slice().iter().map(|&v| v * dout[0]).collect(),
        _ => {
            deltas[hidden] = dout.to_vec();
            if hidden == 0 {
                return Ok(deltas);
            }
            layers[hidden].weight.transpose_matvec(dout)?
        }
    };
    for l in (0..hidden).rev() {
        let z = trace.preactivations[l].as_slice();
        let delta: Vec<T> = upstream
            .iter()
            .zip(z)
            .map(|(&g, &zi)| g * act.derivative(zi))
            .collect();
        if l > 0 {
            upstream = layers[l].weight.transpose_matvec(&delta)?;
        }
        deltas[l] = delta;
    }
    Ok(deltas)
}

/// Input to trainable layer `l` as recorded in the trace.
pub(crate) fn layer_input<T: Scalar>(trace: &ForwardTrace<T>, l: usize) -> &[T] {
    if l == 0 {
        trace.input.as_slice()
    } else {
        trace.activations[l - 1].as_slice()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LayerGradient<T> {
    pub weight: Matrix<T>,
    pub bias: Option<Vector<T>>,
}

/// Gradient of the sample loss, shaped like the network's trainable layers.
/// A frozen top vector has no entry.
#[derive(Debug, Clone, PartialEq)]
pub struct GradientSet<T> {
    pub layers: Vec<LayerGradient<T>>,
}

impl<T: Scalar> GradientSet<T> {
    pub fn weight_norm_squared(&self, layer: usize) -> T {
        let w = self.layers[layer].weight.as_slice();
        w.iter().fold(T::zero(), |a, &x| a + x * x)
    }

    pub fn is_zero(&self) -> bool {
        self.layers.iter().all(|l| {
            l.weight.as_slice().iter().all(|x| x.is_zero())
                && l.bias
                    .as_ref()
                    .is_none_or(|b| b.as_slice().iter().all(|x| x.is_zero()))
        })
    }
}

/// Exact gradient of the sample loss at the traced input.
pub fn backprop<T: Scalar>(
    net: &Network<T>,
    trace: &ForwardTrace<T>,
    target: &TargetSpec,
    loss: SurrogateLoss,
) -> Result<GradientSet<T>> {
    let dout = output_gradient(trace.output.as_slice(), target, loss)?;
    let deltas = layer_deltas(net, trace, &dout)?;
    let layers = net
        .layers()
        .iter()
        .enumerate()
        .map(|(l, layer)| {
            let a = layer_input(trace, l);
            let delta = &deltas[l];
            let mut g = Vec::with_capacity(delta.len() * a.len());
            for &d in delta {
                g.extend(a.iter().map(|&aj| d * aj));
            }
            Ok(LayerGradient {
                weight: Matrix::new(delta.len(), a.len(), g)?,
                bias: layer
                    .bias
                    .as_ref()
                    .map(|_| Vector::from_vec_unchecked(delta.clone())),
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(GradientSet { layers })
}

/// Sign test `y N(x) < 0`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Misclassification {
    Binary(bool),
    PerCoordinate(Vec<bool>),
}

pub fn misclassified<T: Scalar>(trace: &ForwardTrace<T>, target: &TargetSpec) -> Result<Misclassification> {
    let out = trace.output.as_slice();
    target.check_width(out.len())?;
    match target {
        TargetSpec::Binary(y) => Ok(Misclassification::Binary(y * out[0].as_f64() < 0.0)),
        TargetSpec::MultiLabel(ys) => Ok(Misclassification::PerCoordinate(
            ys.iter().zip(out).map(|(y, n)| y * n.as_f64() < 0.0).collect(),
        )),
        TargetSpec::Smoothed { .. } => Err(Error::InvalidArgument(
            "misclassification is undefined for a smoothed target".into(),
        )),
    }
}
