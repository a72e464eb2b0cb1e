//! Per-neuron firing histograms over class labels.

use serde::Serialize;

use crate::data::{Label, LabeledDataset};
use crate::error::{Error, Result};
use crate::model::{forward, Network};
use crate::scalar::Scalar;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AssociationTable {
    pub threshold_factor: f64,
    /// `histograms[i][c]`: samples of class `c` on which hidden neuron `i` fired.
    pub histograms: Vec<Vec<u64>>,
    /// Associated class per neuron.
    pub associated: Vec<Option<u8>>,
}

impl AssociationTable {
    pub fn associated_count(&self) -> usize {
        self.associated.iter().filter(|a| a.is_some()).count()
    }
}

/// A neuron is associated with its top class when that bin is nonzero and
/// at least `threshold_factor` times every other bin.
pub fn associate(hist: &[u64], threshold_factor: f64) -> Option<u8> {
    let (best, &max) = hist.iter().enumerate().max_by_key(|&(i, &v)| (v, std::cmp::Reverse(i)))?;
    let second = hist
        .iter()
        .enumerate()
        .filter(|&(i, _)| i != best)
        .map(|(_, &v)| v)
        .max()
        .unwrap_or(0);
    (max > 0 && max as f64 >= threshold_factor * second as f64).then_some(best as u8)
}

/// Firing histograms of the first hidden layer over a class-labeled dataset.
pub fn digit_association<T: Scalar>(
    net: &Network<T>,
    ds: &LabeledDataset<T>,
    threshold_factor: f64,
) -> Result<AssociationTable> {
    let classes = ds.label_set.size();
    if !matches!(ds.labels.first(), Some(Label::Class(_))) {
        return Err(Error::InvalidArgument("digit association needs class labels".into()));
    }
    if !(threshold_factor >= 1.0) {
        return Err(Error::InvalidArgument(format!(
            "threshold factor must be at least 1, got {threshold_factor}"
        )));
    }
    let width = net.hidden_width(0)?;
    let mut histograms = vec![vec![0u64; classes]; width];
    for (x, &y) in ds.inputs.iter().zip(&ds.labels) {
        let Label::Class(c) = y else {
            return Err(Error::InvalidArgument("mixed label kinds".into()));
        };
        let t = forward(net, x)?;
        for (i, &z) in t.preactivations[0].as_slice().iter().enumerate() {
            if z > T::zero() {
                histograms[i][c as usize] += 1;
            }
        }
    }
    let associated = histograms.iter().map(|h| associate(h, threshold_factor)).collect();
    Ok(AssociationTable {
        threshold_factor,
        histograms,
        associated,
    })
}
