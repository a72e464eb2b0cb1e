//! Input distributions, labeled datasets and the hypercube boundary task.

use std::sync::Arc;

use crate::error::{Error, Result};
use crate::linalg::{Matrix, Vector};
use crate::model::{ActivationKind, ArchMode, Layer, Network};
use crate::rng::RngStream;
use crate::scalar::Scalar;

/// Class label: a sign for binary tasks or a digit for the ten-class task.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Label {
    Sign(i8),
    Class(u8),
}

impl Label {
    pub const POS: Label = Label::Sign(1);
    pub const NEG: Label = Label::Sign(-1);

    pub fn sign(y: f64) -> Self {
        if y > 0.0 {
            Self::POS
        } else {
            Self::NEG
        }
    }

    pub fn as_sign(self) -> Option<f64> {
        match self {
            Self::Sign(s) => Some(s as f64),
            Self::Class(_) => None,
        }
    }
}

/// The finite label set `Y` a label-noise draw picks from.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LabelSet {
    Binary,
    Classes(u8),
}

impl LabelSet {
    pub fn size(self) -> usize {
        match self {
            Self::Binary => 2,
            Self::Classes(n) => n as usize,
        }
    }

    /// The `i`-th label; for `Binary`, index 0 is `+1` and index 1 is `-1`.
    pub fn label(self, i: usize) -> Label {
        match self {
            Self::Binary => [Label::POS, Label::NEG][i],
            Self::Classes(_) => Label::Class(i as u8),
        }
    }

    pub fn contains(self, y: Label) -> bool {
        match (self, y) {
            (Self::Binary, Label::Sign(s)) => s == 1 || s == -1,
            (Self::Classes(n), Label::Class(c)) => c < n,
            _ => false,
        }
    }

    pub fn labels(self) -> Vec<Label> {
        (0..self.size()).map(|i| self.label(i)).collect()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LabeledDataset<T> {
    pub name: String,
    pub inputs: Vec<Vector<T>>,
    pub labels: Vec<Label>,
    pub label_set: LabelSet,
}

impl<T: Scalar> LabeledDataset<T> {
    pub fn new(
        name: impl Into<String>,
        inputs: Vec<Vector<T>>,
        labels: Vec<Label>,
        label_set: LabelSet,
    ) -> Result<Self> {
        if inputs.len() != labels.len() {
            return Err(Error::Shape {
                op: "dataset",
                left: format!("{} inputs", inputs.len()),
                right: format!("{} labels", labels.len()),
            });
        }
        if let Some(d) = inputs.first().map(Vector::len) {
            if inputs.iter().any(|x| x.len() != d) {
                return Err(Error::InvalidArgument("inputs differ in dimension".into()));
            }
        }
        if let Some(bad) = labels.iter().find(|&&y| !label_set.contains(y)) {
            return Err(Error::InvalidArgument(format!("label {bad:?} not in {label_set:?}")));
        }
        Ok(Self {
            name: name.into(),
            inputs,
            labels,
            label_set,
        })
    }

    pub fn len(&self) -> usize {
        self.inputs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.inputs.is_empty()
    }

    pub fn dim(&self) -> Option<usize> {
        self.inputs.first().map(Vector::len)
    }

    /// First `n` samples, order preserved.
    pub fn truncated(&self, n: usize) -> Self {
        Self {
            name: self.name.clone(),
            inputs: self.inputs[..n.min(self.len())].to_vec(),
            labels: self.labels[..n.min(self.len())].to_vec(),
            label_set: self.label_set,
        }
    }
}

/// Where SGD samples come from.
#[derive(Debug, Clone, PartialEq)]
pub enum Distribution<T> {
    /// `N(0, I_d)`, unlabeled.
    Gaussian { d: usize },
    /// Uniform over `{e_1, .., e_d}`, unlabeled.
    StandardBasis { d: usize },
    /// `½U(C_1) + ½U(C_{-1})` with `C_s = {‖x‖∞ = s}`, `s ∈ {1, 1-ε}`;
    /// label `+1` on `C_1`, `-1` on `C_{-1}`.
    HypercubeBoundary { d: usize, eps: f64 },
    /// Uniform over a fixed labeled dataset.
    FixedSet(Arc<LabeledDataset<T>>),
}

impl<T: Scalar> Distribution<T> {
    pub fn dim(&self) -> usize {
        match self {
            Self::Gaussian { d } | Self::StandardBasis { d } | Self::HypercubeBoundary { d, .. } => *d,
            Self::FixedSet(ds) => ds.dim().unwrap_or(0),
        }
    }

    pub fn label_set(&self) -> LabelSet {
        match self {
            Self::FixedSet(ds) => ds.label_set,
            _ => LabelSet::Binary,
        }
    }

    pub fn validate(&self) -> Result<()> {
        match self {
            Self::Gaussian { d } | Self::StandardBasis { d } if *d == 0 => {
                Err(Error::InvalidArgument("dimension must be positive".into()))
            }
            Self::HypercubeBoundary { d, eps } if *d == 0 || !(*eps > 0.0 && *eps < 1.0) => Err(
                Error::InvalidArgument(format!("hypercube needs d > 0 and 0 < eps < 1, got {d}, {eps}")),
            ),
            Self::FixedSet(ds) if ds.is_empty() => Err(Error::Empty("dataset")),
            _ => Ok(()),
        }
    }
}

/// One draw from `dist`. Returns the clean label, or `None` for unlabeled
/// distributions.
///
/// Draw order: Gaussian takes `d` normals; StandardBasis one index; the
/// hypercube takes shell coin, extremal coordinate, its sign, then the
/// remaining coordinates in index order; FixedSet one index.
pub fn sample<T: Scalar>(dist: &Distribution<T>, rng: &mut RngStream) -> Result<(Vector<T>, Option<Label>)> {
    match dist {
        Distribution::Gaussian { d } => {
            let x = (0..*d).map(|_| T::cast(rng.draw_gaussian())).collect();
            Ok((Vector::new(x)?, None))
        }
        Distribution::StandardBasis { d } => Ok((Vector::basis(*d, rng.draw_index(*d)?), None)),
        Distribution::HypercubeBoundary { d, eps } => {
            let outer = rng.draw_index(2)? == 0;
            let s = if outer { 1.0 } else { 1.0 - eps };
            let j = rng.draw_index(*d)?;
            let sign = if rng.draw_index(2)? == 0 { 1.0 } else { -1.0 };
            let mut x = Vec::with_capacity(*d);
            for i in 0..*d {
                x.push(if i == j {
                    sign * s
                } else {
                    rng.draw_uniform(-s, s)?
                });
            }
            let x = Vector::new(x.into_iter().map(T::cast).collect())?;
            Ok((x, Some(if outer { Label::POS } else { Label::NEG })))
        }
        Distribution::FixedSet(ds) => {
            let i = rng.draw_index(ds.len())?;
            Ok((ds.inputs[i].clone(), Some(ds.labels[i])))
        }
    }
}

/// `n` i.i.d. labeled hypercube samples.
pub fn make_hypercube_dataset<T: Scalar>(
    d: usize,
    eps: f64,
    n: usize,
    rng: &mut RngStream,
) -> Result<LabeledDataset<T>> {
    if n == 0 {
        return Err(Error::Empty("hypercube dataset"));
    }
    let dist = Distribution::HypercubeBoundary { d, eps };
    dist.validate()?;
    let (mut inputs, mut labels) = (Vec::with_capacity(n), Vec::with_capacity(n));
    for _ in 0..n {
        let (x, y) = sample::<T>(&dist, rng)?;
        inputs.push(x);
        labels.push(y.expect("hypercube samples are labeled"));
    }
    LabeledDataset::new(format!("hypercube(d={d}, eps={eps})"), inputs, labels, LabelSet::Binary)
}

/// Sparse exact representation of the hypercube boundary labels: `2d` hidden
/// neurons reading `±x_i - (1 - ε/2)`, summed, minus `0.5`.
pub fn reference_hypercube_network<T: Scalar>(d: usize, eps: f64) -> Result<Network<T>> {
    if d == 0 || !(eps > 0.0 && eps < 1.0) {
        return Err(Error::InvalidArgument(format!(
            "reference network needs d > 0 and 0 < eps < 1, got {d}, {eps}"
        )));
    }
    let mut w1 = Matrix::zeros(2 * d, d);
    for i in 0..d {
        w1.set(i, i, T::one());
        w1.set(i + d, i, -T::one());
    }
    let b1 = Vector::filled(2 * d, T::cast(-(1.0 - eps / 2.0)));
    let w2 = Matrix::new(1, 2 * d, vec![T::one(); 2 * d])?;
    let b2 = Vector::filled(1, T::cast(-0.5));
    Network::new(
        vec![
            Layer {
                weight: w1,
                bias: Some(b1),
            },
            Layer {
                weight: w2,
                bias: Some(b2),
            },
        ],
        ActivationKind::Relu,
        ArchMode::WithBias,
    )
}
