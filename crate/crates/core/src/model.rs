//! Fully connected networks, traced forward evaluation and activation
//! sparsity instrumentation.
//!
//! A neuron is *active* on an input when its preactivation is strictly
//! positive. Every derivative at a kink uses the `z <= 0` branch, so
//! `ReLU'(0) = 0`: a neuron sitting exactly at zero neither fires nor
//! receives gradient.

use serde::{Deserialize, Serialize};

use crate::error::{shape_err, Error, Result};
use crate::linalg::{dot, dot_sparse, sum_squares, Matrix, Vector};
use crate::rng::RngStream;
use crate::scalar::Scalar;

/// Positively homogeneous activation: `f'(z) * z == f(z)` away from `z = 0`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ActivationKind {
    Relu,
    LeakyRelu { alpha: f64 },
    Identity,
}

impl ActivationKind {
    pub fn validate(self) -> Result<()> {
        match self {
            Self::LeakyRelu { alpha } if !(alpha > 0.0 && alpha < 1.0) => Err(
                Error::InvalidArgument(format!("leaky ReLU slope must lie in (0, 1), got {alpha}")),
            ),
            _ => Ok(()),
        }
    }

    #[inline]
    pub fn apply<T: Scalar>(self, z: T) -> T {
        match self {
            Self::Relu => {
                if z > T::zero() {
                    z
                } else {
                    T::zero()
                }
            }
            Self::LeakyRelu { alpha } => {
                if z > T::zero() {
                    z
                } else {
                    T::cast(alpha) * z
                }
            }
            Self::Identity => z,
        }
    }

    #[inline]
    pub fn derivative<T: Scalar>(self, z: T) -> T {
        match self {
            Self::Relu => {
                if z > T::zero() {
                    T::one()
                } else {
                    T::zero()
                }
            }
            Self::LeakyRelu { alpha } => {
                if z > T::zero() {
                    T::one()
                } else {
                    T::cast(alpha)
                }
            }
            Self::Identity => T::one(),
        }
    }

    /// The finite kink set.
    pub fn kinks(self) -> &'static [f64] {
        match self {
            Self::Relu | Self::LeakyRelu { .. } => &[0.0],
            Self::Identity => &[],
        }
    }
}

/// How biases enter the network.
#[derive(Debug, Clone, PartialEq)]
pub enum ArchMode<T> {
    /// Every layer carries a bias vector.
    WithBias,
    /// No bias vectors; the input is extended to `(x, 1)` inside [`forward`].
    AugmentedInput,
    /// No bias vectors and no augmentation, e.g. a bare neuron `V · x`.
    Plain,
    /// One trainable hidden layer without bias; the output weights `top` are frozen.
    FixedTopLayer { top: Vector<T> },
}

/// Serializable tag for [`ArchMode`]. `FixedTopLayer` always uses the
/// balanced top vector `(1, .., 1, -1, .., -1)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ModeKind {
    WithBias,
    AugmentedInput,
    Plain,
    FixedTopLayer,
}

impl<T> ArchMode<T> {
    pub fn kind(&self) -> ModeKind {
        match self {
            Self::WithBias => ModeKind::WithBias,
            Self::AugmentedInput => ModeKind::AugmentedInput,
            Self::Plain => ModeKind::Plain,
            Self::FixedTopLayer { .. } => ModeKind::FixedTopLayer,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Layer<T> {
    pub weight: Matrix<T>,
    pub bias: Option<Vector<T>>,
}

/// Layer widths and architecture choices, independent of weight values.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ArchSpec {
    pub input_dim: usize,
    /// Hidden widths; for `FixedTopLayer` a single even width `2k`.
    pub hidden: Vec<usize>,
    pub output_width: usize,
    pub activation: ActivationKind,
    pub mode: ModeKind,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Network<T> {
    layers: Vec<Layer<T>>,
    activation: ActivationKind,
    mode: ArchMode<T>,
}

impl<T: Scalar> Network<T> {
    pub fn new(layers: Vec<Layer<T>>, activation: ActivationKind, mode: ArchMode<T>) -> Result<Self> {
        activation.validate()?;
        if layers.is_empty() {
            return Err(Error::Empty("network layer list"));
        }
        for (l, pair) in layers.windows(2).enumerate() {
            if pair[1].weight.cols() != pair[0].weight.rows() {
                return Err(shape_err(
                    "layer chaining",
                    format!("layer {l} output width {}", pair[0].weight.rows()),
                    format!("layer {} input width {}", l + 1, pair[1].weight.cols()),
                ));
            }
        }
        for (l, layer) in layers.iter().enumerate() {
            if let Some(b) = &layer.bias {
                if b.len() != layer.weight.rows() {
                    return Err(shape_err(
                        "bias",
                        format!("layer {l} width {}", layer.weight.rows()),
                        format!("bias length {}", b.len()),
                    ));
                }
            }
            let wants_bias = matches!(mode, ArchMode::WithBias);
            if layer.bias.is_some() != wants_bias {
                return Err(Error::InvalidArgument(format!(
                    "layer {l}: bias presence does not match {:?} mode",
                    mode.kind()
                )));
            }
        }
        if let ArchMode::FixedTopLayer { top } = &mode {
            if layers.len() != 1 {
                return Err(Error::InvalidArgument(
                    "fixed-top-layer networks have exactly one trainable layer".into(),
                ));
            }
            if top.len() != layers[0].weight.rows() {
                return Err(shape_err("top vector", layers[0].weight.rows(), top.len()));
            }
        }
        if matches!(mode, ArchMode::AugmentedInput) && layers[0].weight.cols() < 2 {
            return Err(Error::InvalidArgument(
                "augmented-input first layer needs at least one data column plus the constant".into(),
            ));
        }
        Ok(Self {
            layers,
            activation,
            mode,
        })
    }

    /// Balanced top vector `(1, .., 1, -1, .., -1)` of length `2k`.
    pub fn balanced_top(k: usize) -> Vector<T> {
        assert!(k > 0);
        Vector::from_vec_unchecked(
            (0..2 * k)
                .map(|i| if i < k { T::one() } else { -T::one() })
                .collect(),
        )
    }

    /// Network with all weights (and biases) drawn i.i.d. from
    /// `U[-half_width, half_width]`, layer by layer, weights row-major before
    /// the layer's bias.
    pub fn init_uniform(spec: &ArchSpec, half_width: f64, rng: &mut RngStream) -> Result<Self> {
        Self::init_with(spec, |_, _| Ok(T::cast(rng.draw_uniform(-half_width, half_width)?)))
    }

    /// All-zero network of the given shape.
    pub fn zeros(spec: &ArchSpec) -> Result<Self> {
        Self::init_with(spec, |_, _| Ok(T::zero()))
    }

    fn init_with(spec: &ArchSpec, mut draw: impl FnMut(usize, usize) -> Result<T>) -> Result<Self> {
        if spec.input_dim == 0 || spec.output_width == 0 || spec.hidden.contains(&0) {
            return Err(Error::InvalidArgument(format!("zero-width layer in {spec:?}")));
        }
        let first_cols = match spec.mode {
            ModeKind::AugmentedInput => spec.input_dim + 1,
            _ => spec.input_dim,
        };
        let mut widths = vec![first_cols];
        widths.extend(&spec.hidden);
        if spec.mode != ModeKind::FixedTopLayer {
            widths.push(spec.output_width);
        } else if spec.hidden.len() != 1 || spec.hidden[0] % 2 != 0 || spec.output_width != 1 {
            return Err(Error::InvalidArgument(
                "fixed-top-layer needs one even hidden width and output width 1".into(),
            ));
        }
        let mut layers = Vec::with_capacity(widths.len() - 1);
        for (l, pair) in widths.windows(2).enumerate() {
            let (cols, rows) = (pair[0], pair[1]);
            let mut w = Vec::with_capacity(rows * cols);
            for i in 0..rows * cols {
                w.push(draw(l, i)?);
            }
            let weight = Matrix::new(rows, cols, w)?;
            let bias = if spec.mode == ModeKind::WithBias {
                let mut b = Vec::with_capacity(rows);
                for i in 0..rows {
                    b.push(draw(l, rows * cols + i)?);
                }
                Some(Vector::new(b)?)
            } else {
                None
            };
            layers.push(Layer { weight, bias });
        }
        let mode = match spec.mode {
            ModeKind::WithBias => ArchMode::WithBias,
            ModeKind::AugmentedInput => ArchMode::AugmentedInput,
            ModeKind::Plain => ArchMode::Plain,
            ModeKind::FixedTopLayer => ArchMode::FixedTopLayer {
                top: Self::balanced_top(spec.hidden[0] / 2),
            },
        };
        Self::new(layers, spec.activation, mode)
    }

    pub fn layers(&self) -> &[Layer<T>] {
        &self.layers
    }

    pub(crate) fn layers_mut(&mut self) -> &mut [Layer<T>] {
        &mut self.layers
    }

    /// Row-major weights of one trainable layer, shape fixed.
    pub fn weights_mut(&mut self, layer: usize) -> &mut [T] {
        self.layers[layer].weight.as_mut_slice()
    }

    pub fn bias_mut(&mut self, layer: usize) -> Option<&mut [T]> {
        self.layers[layer].bias.as_mut().map(Vector::as_mut_slice)
    }

    pub fn activation(&self) -> ActivationKind {
        self.activation
    }

    pub fn mode(&self) -> &ArchMode<T> {
        &self.mode
    }

    /// Width of `x` as stored in datasets (before augmentation).
    pub fn input_dim(&self) -> usize {
        let cols = self.layers[0].weight.cols();
        match self.mode {
            ArchMode::AugmentedInput => cols - 1,
            _ => cols,
        }
    }

    pub fn output_width(&self) -> usize {
        match &self.mode {
            ArchMode::FixedTopLayer { .. } => 1,
            _ => self.layers.last().expect("nonempty").weight.rows(),
        }
    }

    pub fn hidden_layer_count(&self) -> usize {
        match self.mode {
            ArchMode::FixedTopLayer { .. } => 1,
            _ => self.layers.len() - 1,
        }
    }

    pub fn hidden_width(&self, layer: usize) -> Result<usize> {
        self.check_hidden(layer)?;
        Ok(self.layers[layer].weight.rows())
    }

    pub fn spec(&self) -> ArchSpec {
        let hidden = (0..self.hidden_layer_count())
            .map(|l| self.layers[l].weight.rows())
            .collect();
        ArchSpec {
            input_dim: self.input_dim(),
            hidden,
            output_width: self.output_width(),
            activation: self.activation,
            mode: self.mode.kind(),
        }
    }

    fn check_hidden(&self, layer: usize) -> Result<()> {
        if layer >= self.hidden_layer_count() {
            return Err(Error::IndexOutOfRange {
                what: "hidden layers",
                index: layer,
                len: self.hidden_layer_count(),
            });
        }
        Ok(())
    }

    pub fn check_finite(&self) -> Result<()> {
        for layer in &self.layers {
            layer.weight.check_finite()?;
            if let Some(b) = &layer.bias {
                b.check_finite()?;
            }
        }
        Ok(())
    }

    /// `sqrt(Σ_l ‖W_l‖_F²)` over all trainable weight matrices.
    pub fn total_weight_norm(&self) -> T {
        self.layers
            .iter()
            .fold(T::zero(), |acc, l| {
                acc + sum_squares(l.weight.as_slice())
            })
            .sqrt()
    }

    /// Weight norm over matrices and bias vectors together.
    pub fn total_parameter_norm(&self) -> T {
        self.layers
            .iter()
            .fold(T::zero(), |acc, l| {
                let b = l.bias.as_ref().map_or(T::zero(), Vector::norm_squared);
                acc + sum_squares(l.weight.as_slice()) + b
            })
            .sqrt()
    }

    pub fn to_f64(&self) -> Network<f64> {
        let conv_m = |m: &Matrix<T>| {
            Matrix::new(m.rows(), m.cols(), m.as_slice().iter().map(|x| x.as_f64()).collect())
                .expect("finite values stay finite")
        };
        let layers = self
            .layers
            .iter()
            .map(|l| Layer {
                weight: conv_m(&l.weight),
                bias: l
                    .bias
                    .as_ref()
                    .map(|b| Vector::from_vec_unchecked(b.to_f64_vec())),
            })
            .collect();
        let mode = match &self.mode {
            ArchMode::WithBias => ArchMode::WithBias,
            ArchMode::AugmentedInput => ArchMode::AugmentedInput,
            ArchMode::Plain => ArchMode::Plain,
            ArchMode::FixedTopLayer { top } => ArchMode::FixedTopLayer {
                top: Vector::from_vec_unchecked(top.to_f64_vec()),
            },
        };
        Network {
            layers,
            activation: self.activation,
            mode,
        }
    }
}

/// Per-input record of every hidden preactivation and activation.
///
/// `input` holds the vector actually fed to the first layer, i.e. `(x, 1)`
/// in augmented-input mode.
#[derive(Debug, Clone, PartialEq)]
pub struct ForwardTrace<T> {
    pub input: Vector<T>,
    pub preactivations: Vec<Vector<T>>,
    pub activations: Vec<Vector<T>>,
    pub output: Vector<T>,
}

fn affine<T: Scalar>(layer: &Layer<T>, a: &[T], nonzero: Option<&[usize]>) -> Vec<T> {
    let w = &layer.weight;
    let mut z: Vec<T> = match nonzero {
        Some(idx) => (0..w.rows()).map(|r| dot_sparse(w.row(r), a, idx)).collect(),
        None => (0..w.rows()).map(|r| dot(w.row(r), a)).collect(),
    };
    if let Some(b) = &layer.bias {
        for (zi, &bi) in z.iter_mut().zip(b.as_slice()) {
            *zi += bi;
        }
    }
    z
}

/// Indices of nonzero entries when the input is mostly zeros. Skipping exact
/// zeros leaves every dot product bit-identical.
pub(crate) fn sparse_support<T: Scalar>(a: &[T]) -> Option<Vec<usize>> {
    let nz: Vec<usize> = a
        .iter()
        .enumerate()
        .filter(|(_, &x)| x != T::zero())
        .map(|(i, _)| i)
        .collect();
    (nz.len() * 2 < a.len()).then_some(nz)
}

/// Evaluates the network on `x`, recording every hidden layer.
pub fn forward<T: Scalar>(net: &Network<T>, x: &Vector<T>) -> Result<ForwardTrace<T>> {
    if x.len() != net.input_dim() {
        return Err(shape_err("forward input", net.input_dim(), x.len()));
    }
    let input = match net.mode {
        ArchMode::AugmentedInput => x.augmented(),
        _ => x.clone(),
    };
    let hidden = net.hidden_layer_count();
    let mut preactivations = Vec::with_capacity(hidden);
    let mut activations: Vec<Vector<T>> = Vec::with_capacity(hidden);
    let support = sparse_support(input.as_slice());
    for l in 0..hidden {
        let prev = activations.last().unwrap_or(&input).as_slice();
        let z = affine(&net.layers[l], prev, if l == 0 { support.as_deref() } else { None });
        let a = z.iter().map(|&zi| net.activation.apply(zi)).collect();
        preactivations.push(Vector::from_vec_unchecked(z));
        activations.push(Vector::from_vec_unchecked(a));
    }
    let last = activations.last().unwrap_or(&input).as_slice();
    let output = match &net.mode {
        ArchMode::FixedTopLayer { top } => vec![dot(top.as_slice(), last)],
        _ => affine(
            &net.layers[hidden],
            last,
            if hidden == 0 { support.as_deref() } else { None },
        ),
    };
    Ok(ForwardTrace {
        input,
        preactivations,
        activations,
        output: Vector::from_vec_unchecked(output),
    })
}

/// Number of strictly positive preactivations in one hidden layer.
pub fn active_count<T: Scalar>(trace: &ForwardTrace<T>, hidden_layer: usize) -> Result<usize> {
    let z = trace
        .preactivations
        .get(hidden_layer)
        .ok_or(Error::IndexOutOfRange {
            what: "hidden layers",
            index: hidden_layer,
            len: trace.preactivations.len(),
        })?;
    Ok(z.as_slice().iter().filter(|&&v| v > T::zero()).count())
}

/// Sum of active counts over a set of inputs.
pub fn total_active<T: Scalar>(net: &Network<T>, inputs: &[Vector<T>], layer: usize) -> Result<u64> {
    net.check_hidden(layer)?;
    let mut total = 0u64;
    for x in inputs {
        total += active_count(&forward(net, x)?, layer)? as u64;
    }
    Ok(total)
}

/// Mean number of active neurons of `layer` over `inputs`.
pub fn typical_active<T: Scalar>(net: &Network<T>, inputs: &[Vector<T>], layer: usize) -> Result<f64> {
    if inputs.is_empty() {
        return Err(Error::Empty("dataset"));
    }
    Ok(total_active(net, inputs, layer)? as f64 / inputs.len() as f64)
}

/// Neurons of `layer` whose preactivation is `<= 0` on every input.
pub fn dead_neurons<T: Scalar>(net: &Network<T>, inputs: &[Vector<T>], layer: usize) -> Result<Vec<usize>> {
    if inputs.is_empty() {
        return Err(Error::Empty("dataset"));
    }
    let width = net.hidden_width(layer)?;
    let mut alive = vec![false; width];
    for x in inputs {
        let trace = forward(net, x)?;
        for (flag, &z) in alive.iter_mut().zip(trace.preactivations[layer].as_slice()) {
            *flag |= z > T::zero();
        }
    }
    Ok((0..width).filter(|&i| !alive[i]).collect())
}

/// `(‖W_l‖_F, ‖b_l‖)` for each trainable layer, in order.
pub fn layer_norms<T: Scalar>(net: &Network<T>) -> Vec<(T, Option<T>)> {
    net.layers
        .iter()
        .map(|l| (l.weight.frobenius_norm(), l.bias.as_ref().map(Vector::norm)))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn one_neuron(b: f64) -> Network<f64> {
        Network::new(
            vec![
                Layer {
                    weight: Matrix::from_rows(&[vec![1.0, 0.0]]).unwrap(),
                    bias: Some(Vector::from_f64(&[b]).unwrap()),
                },
                Layer {
                    weight: Matrix::from_rows(&[vec![1.0]]).unwrap(),
                    bias: Some(Vector::from_f64(&[0.0]).unwrap()),
                },
            ],
            ActivationKind::Relu,
            ArchMode::WithBias,
        )
        .unwrap()
    }

    fn v(x: &[f64]) -> Vector<f64> {
        Vector::from_f64(x).unwrap()
    }

    #[test]
    fn hand_computed_single_neuron() {
        let net = one_neuron(-0.5);
        let t = forward(&net, &v(&[1.0, 0.0])).unwrap();
        assert_eq!(t.preactivations[0].as_slice(), &[0.5]);
        assert_eq!(t.output.as_slice(), &[0.5]);
        let t = forward(&net, &v(&[0.0, 1.0])).unwrap();
        assert_eq!(t.preactivations[0].as_slice(), &[-0.5]);
        assert_eq!(t.activations[0].as_slice(), &[0.0]);
        assert_eq!(t.output.as_slice(), &[0.0]);
    }

    #[test]
    fn zero_network_outputs_zero() {
        let spec = ArchSpec {
            input_dim: 3,
            hidden: vec![4, 2],
            output_width: 1,
            activation: ActivationKind::Relu,
            mode: ModeKind::WithBias,
        };
        let net = Network::<f64>::zeros(&spec).unwrap();
        let t = forward(&net, &v(&[1.0, -2.0, 3.0])).unwrap();
        assert_eq!(t.output.as_slice(), &[0.0]);
        assert!(t.preactivations.iter().all(|z| z.as_slice().iter().all(|&x| x == 0.0)));
        let inputs = vec![v(&[1.0, 2.0, 3.0])];
        assert_eq!(dead_neurons(&net, &inputs, 0).unwrap(), vec![0, 1, 2, 3]);
    }

    #[test]
    fn active_count_is_strict() {
        let trace = ForwardTrace {
            input: v(&[1.0]),
            preactivations: vec![v(&[0.3, 0.0, -1.2])],
            activations: vec![v(&[0.3, 0.0, 0.0])],
            output: v(&[0.0]),
        };
        assert_eq!(active_count(&trace, 0).unwrap(), 1);
        assert!(active_count(&trace, 1).is_err());
    }

    #[test]
    fn typical_active_is_mean_of_counts() {
        let net = one_neuron(-0.5);
        let xs = vec![v(&[1.0, 0.0]), v(&[0.0, 1.0])];
        assert_eq!(typical_active(&net, &xs[..1], 0).unwrap(), 1.0);
        assert_eq!(typical_active(&net, &xs, 0).unwrap(), 0.5);
        assert!(typical_active(&net, &[], 0).is_err());
        assert!(dead_neurons(&net, &[], 0).is_err());
    }

    #[test]
    fn negative_neuron_is_dead_on_nonnegative_data() {
        let net = Network::new(
            vec![
                Layer {
                    weight: Matrix::from_rows(&[vec![-1.0, -2.0], vec![1.0, 1.0]]).unwrap(),
                    bias: Some(v(&[-0.1, 0.0])),
                },
                Layer {
                    weight: Matrix::from_rows(&[vec![1.0, 1.0]]).unwrap(),
                    bias: Some(v(&[0.0])),
                },
            ],
            ActivationKind::Relu,
            ArchMode::WithBias,
        )
        .unwrap();
        let xs = vec![v(&[0.0, 1.0]), v(&[2.0, 0.5]), v(&[0.0, 0.0])];
        assert_eq!(dead_neurons(&net, &xs, 0).unwrap(), vec![0]);
    }

    #[test]
    fn augmented_input_appends_constant() {
        let net = Network::new(
            vec![
                Layer {
                    weight: Matrix::from_rows(&[vec![1.0, 2.0, -1.0]]).unwrap(),
                    bias: None,
                },
                Layer {
                    weight: Matrix::from_rows(&[vec![3.0]]).unwrap(),
                    bias: None,
                },
            ],
            ActivationKind::Relu,
            ArchMode::AugmentedInput,
        )
        .unwrap();
        assert_eq!(net.input_dim(), 2);
        let t = forward(&net, &v(&[1.0, 1.0])).unwrap();
        assert_eq!(t.input.as_slice(), &[1.0, 1.0, 1.0]);
        assert_eq!(t.output.as_slice(), &[6.0]);
        assert!(forward(&net, &v(&[1.0, 1.0, 1.0])).is_err());
    }

    #[test]
    fn mode_and_shape_validation() {
        let w = || Matrix::<f64>::from_rows(&[vec![1.0, 2.0]]).unwrap();
        let missing_bias = Network::new(
            vec![Layer { weight: w(), bias: None }],
            ActivationKind::Relu,
            ArchMode::WithBias,
        );
        assert!(missing_bias.is_err());
        let bad_chain = Network::new(
            vec![
                Layer { weight: w(), bias: None },
                Layer { weight: w(), bias: None },
            ],
            ActivationKind::Relu,
            ArchMode::Plain,
        );
        assert!(matches!(bad_chain, Err(Error::Shape { .. })));
        let bad_alpha = Network::new(
            vec![Layer { weight: w(), bias: None }],
            ActivationKind::LeakyRelu { alpha: 1.5 },
            ArchMode::Plain,
        );
        assert!(bad_alpha.is_err());
        let bad_top = Network::new(
            vec![Layer { weight: w(), bias: None }],
            ActivationKind::Relu,
            ArchMode::FixedTopLayer { top: v(&[1.0, -1.0]) },
        );
        assert!(bad_top.is_err());
    }

    #[test]
    fn fixed_top_output_is_signed_sum_of_halves() {
        let mut rng = RngStream::new(4, 4);
        let spec = ArchSpec {
            input_dim: 3,
            hidden: vec![6],
            output_width: 1,
            activation: ActivationKind::Relu,
            mode: ModeKind::FixedTopLayer,
        };
        let net = Network::<f64>::init_uniform(&spec, 1.0, &mut rng).unwrap();
        let ArchMode::FixedTopLayer { top } = net.mode() else {
            panic!()
        };
        assert_eq!(top.as_slice(), &[1.0, 1.0, 1.0, -1.0, -1.0, -1.0]);
        for _ in 0..20 {
            let x = v(&[rng.draw_gaussian(), rng.draw_gaussian(), rng.draw_gaussian()]);
            let t = forward(&net, &x).unwrap();
            let a = t.activations[0].as_slice();
            let expected = a[..3].iter().sum::<f64>() - a[3..].iter().sum::<f64>();
            assert!((t.output[0] - expected).abs() < 1e-12);
        }
    }

    #[test]
    fn homogeneity_and_count_partition() {
        let mut rng = RngStream::new(8, 1);
        for activation in [
            ActivationKind::Relu,
            ActivationKind::LeakyRelu { alpha: 0.1 },
            ActivationKind::Identity,
        ] {
            let spec = ArchSpec {
                input_dim: 4,
                hidden: vec![7, 5],
                output_width: 2,
                activation,
                mode: ModeKind::WithBias,
            };
            let net = Network::<f64>::init_uniform(&spec, 3f64.sqrt(), &mut rng).unwrap();
            let x = v(&[0.3, -1.0, 2.0, 0.5]);
            let t = forward(&net, &x).unwrap();
            for (l, z) in t.preactivations.iter().enumerate() {
                for &zi in z.as_slice() {
                    assert_eq!(activation.derivative(zi) * zi, activation.apply(zi));
                }
                let active = active_count(&t, l).unwrap();
                let off = z.as_slice().iter().filter(|&&zi| zi <= 0.0).count();
                assert_eq!(active + off, net.hidden_width(l).unwrap());
            }
        }
    }

    #[test]
    fn layer_norms_examples() {
        let net = Network::new(
            vec![
                Layer {
                    weight: Matrix::<f64>::identity(3),
                    bias: Some(Vector::zeros(3)),
                },
                Layer {
                    weight: Matrix::identity(3),
                    bias: Some(Vector::zeros(3)),
                },
            ],
            ActivationKind::Relu,
            ArchMode::WithBias,
        )
        .unwrap();
        for (w, b) in layer_norms(&net) {
            assert!((w - 3f64.sqrt()).abs() < 1e-15);
            assert_eq!(b, Some(0.0));
        }
        let mut rng = RngStream::new(1, 2);
        let spec = net.spec();
        let random = Network::<f64>::init_uniform(&spec, 1.0, &mut rng).unwrap();
        for ((w, _), layer) in layer_norms(&random).iter().zip(random.layers()) {
            assert_eq!(*w, crate::linalg::frobenius_norm(&layer.weight));
        }
    }

    #[test]
    fn fresh_network_fires_half_its_neurons_on_gaussian_inputs() {
        let mut rng = RngStream::new(2024, 7);
        let spec = ArchSpec {
            input_dim: 30,
            hidden: vec![120],
            output_width: 1,
            activation: ActivationKind::Relu,
            mode: ModeKind::WithBias,
        };
        let net = Network::<f64>::init_uniform(&spec, 3f64.sqrt(), &mut rng).unwrap();
        let xs: Vec<_> = (0..1000)
            .map(|_| Vector::new((0..30).map(|_| rng.draw_gaussian()).collect()).unwrap())
            .collect();
        let a = typical_active(&net, &xs, 0).unwrap();
        assert!((a - 60.0).abs() <= 5.0, "typical active {a}");
    }

    #[test]
    fn sparse_path_matches_dense_path() {
        let mut rng = RngStream::new(3, 3);
        let spec = ArchSpec {
            input_dim: 10,
            hidden: vec![6],
            output_width: 2,
            activation: ActivationKind::Relu,
            mode: ModeKind::WithBias,
        };
        let net = Network::<f64>::init_uniform(&spec, 1.0, &mut rng).unwrap();
        let mut x = vec![0.0; 10];
        x[3] = 0.7;
        x[8] = -0.2;
        let t = forward(&net, &v(&x)).unwrap();
        let dense: Vec<f64> = (0..6)
            .map(|r| dot(net.layers()[0].weight.row(r), &x) + net.layers()[0].bias.as_ref().unwrap()[r])
            .collect();
        assert_eq!(t.preactivations[0].as_slice(), dense.as_slice());
    }
}
