//! Versioned binary network container.
//!
//! All integers are little-endian `u32`, all reals little-endian IEEE-754
//! `f64` (an `f32` network widens losslessly on save and narrows back
//! exactly on load).
//!
//! ```text
//! magic        8 bytes  "NSGDNET\0"
//! version      u32      1
//! mode         u8       0 with-bias, 1 augmented-input, 2 plain, 3 fixed-top-layer
//! activation   u8       0 relu, 1 leaky relu, 2 identity
//! alpha        f64      leaky slope (0 otherwise)
//! layer_count  u32
//! per layer:
//!   rows       u32
//!   cols       u32
//!   has_bias   u8
//!   weights    rows*cols f64, row-major
//!   bias       rows f64 (only if has_bias)
//! top_len      u32      fixed-top-layer only
//! top          top_len f64
//! ```

use std::path::Path;

use crate::error::{Error, Result};
use crate::linalg::{Matrix, Vector};
use crate::model::{ActivationKind, ArchMode, Layer, Network};
use crate::scalar::Scalar;

pub const MAGIC: &[u8; 8] = b"NSGDNET\0";
pub const VERSION: u32 = 1;

pub fn to_bytes<T: Scalar>(net: &Network<T>) -> Vec<u8> {
    let mut out = Vec::new();
    out.extend_from_slice(MAGIC);
    out.extend_from_slice(&VERSION.to_le_bytes());
    out.push(match net.mode() {
        ArchMode::WithBias => 0,
        ArchMode::AugmentedInput => 1,
        ArchMode::Plain => 2,
        ArchMode::FixedTopLayer { .. } => 3,
    });
    let (tag, alpha) = match net.activation() {
        ActivationKind::Relu => (0u8, 0.0),
        ActivationKind::LeakyRelu { alpha } => (1, alpha),
        ActivationKind::Identity => (2, 0.0),
    };
    out.push(tag);
    out.extend_from_slice(&alpha.to_le_bytes());
    out.extend_from_slice(&(net.layers().len() as u32).to_le_bytes());
    let put = |out: &mut Vec<u8>, xs: &[T]| {
        for x in xs {
            out.extend_from_slice(&x.as_f64().to_le_bytes());
        }
    };
    for layer in net.layers() {
        out.extend_from_slice(&(layer.weight.rows() as u32).to_le_bytes());
        out.extend_from_slice(&(layer.weight.cols() as u32).to_le_bytes());
        out.push(layer.bias.is_some() as u8);
        put(&mut out, layer.weight.as_slice());
        if let Some(b) = &layer.bias {
            put(&mut out, b.as_slice());
        }
    }
    if let ArchMode::FixedTopLayer { top } = net.mode() {
        out.extend_from_slice(&(top.len() as u32).to_le_bytes());
        put(&mut out, top.as_slice());
    }
    out
}

struct Reader<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        let end = self.pos.checked_add(n).filter(|&e| e <= self.bytes.len());
        let end = end.ok_or_else(|| {
            Error::NetworkFile(format!("truncated at byte {} (need {n} more)", self.pos))
        })?;
        let s = &self.bytes[self.pos..end];
        self.pos = end;
        Ok(s)
    }

    fn u8(&mut self) -> Result<u8> {
        Ok(self.take(1)?[0])
    }

    fn u32(&mut self) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().expect("4 bytes")))
    }

    fn f64(&mut self) -> Result<f64> {
        Ok(f64::from_le_bytes(self.take(8)?.try_into().expect("8 bytes")))
    }

    fn reals<T: Scalar>(&mut self, n: usize) -> Result<Vec<T>> {
        (0..n).map(|_| self.f64().map(T::cast)).collect()
    }
}

pub fn from_bytes<T: Scalar>(bytes: &[u8]) -> Result<Network<T>> {
    let mut r = Reader { bytes, pos: 0 };
    if r.take(8)? != MAGIC {
        return Err(Error::NetworkFile("bad magic".into()));
    }
    let version = r.u32()?;
    if version != VERSION {
        return Err(Error::NetworkFile(format!("unsupported version {version}")));
    }
    let mode_tag = r.u8()?;
    let act_tag = r.u8()?;
    let alpha = r.f64()?;
    let activation = match act_tag {
        0 => ActivationKind::Relu,
        1 => ActivationKind::LeakyRelu { alpha },
        2 => ActivationKind::Identity,
        t => return Err(Error::NetworkFile(format!("unknown activation tag {t}"))),
    };
    let count = r.u32()? as usize;
    let mut layers = Vec::with_capacity(count.min(64));
    for _ in 0..count {
        let rows = r.u32()? as usize;
        let cols = r.u32()? as usize;
        let has_bias = r.u8()? != 0;
        let weight = Matrix::new(rows, cols, r.reals(rows * cols)?)?;
        let bias = if has_bias {
            Some(Vector::new(r.reals(rows)?)?)
        } else {
            None
        };
        layers.push(Layer { weight, bias });
    }
    let mode = match mode_tag {
        0 => ArchMode::WithBias,
        1 => ArchMode::AugmentedInput,
        2 => ArchMode::Plain,
        3 => {
            let n = r.u32()? as usize;
            ArchMode::FixedTopLayer {
                top: Vector::new(r.reals(n)?)?,
            }
        }
        t => return Err(Error::NetworkFile(format!("unknown mode tag {t}"))),
    };
    if r.pos != bytes.len() {
        return Err(Error::NetworkFile(format!(
            "{} trailing bytes",
            bytes.len() - r.pos
        )));
    }
    Network::new(layers, activation, mode)
}

pub fn save<T: Scalar>(net: &Network<T>, path: impl AsRef<Path>) -> Result<()> {
    std::fs::write(path, to_bytes(net))?;
    Ok(())
}

pub fn load<T: Scalar>(path: impl AsRef<Path>) -> Result<Network<T>> {
    from_bytes(&std::fs::read(path)?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{ArchSpec, ModeKind};
    use crate::rng::RngStream;
    use proptest::prelude::*;

    fn spec(mode: ModeKind, activation: ActivationKind) -> ArchSpec {
        ArchSpec {
            input_dim: 3,
            hidden: vec![4],
            output_width: 1,
            activation,
            mode,
        }
    }

    proptest! {
        #[test]
        fn round_trip_is_bit_exact(seed in any::<u64>(), mode in 0usize..4, act in 0usize..3) {
            let mode = [ModeKind::WithBias, ModeKind::AugmentedInput, ModeKind::Plain, ModeKind::FixedTopLayer][mode];
            let act = [ActivationKind::Relu, ActivationKind::LeakyRelu { alpha: 0.1 }, ActivationKind::Identity][act];
            let net = Network::<f64>::init_uniform(&spec(mode, act), 1.7, &mut RngStream::new(seed, 0)).unwrap();
            let bytes = to_bytes(&net);
            let back: Network<f64> = from_bytes(&bytes).unwrap();
            prop_assert_eq!(&back, &net);
            prop_assert_eq!(to_bytes(&back), bytes);
        }
    }

    #[test]
    fn f32_round_trip() {
        let net = Network::<f32>::init_uniform(
            &spec(ModeKind::WithBias, ActivationKind::Relu),
            1.0,
            &mut RngStream::new(1, 1),
        )
        .unwrap();
        assert_eq!(from_bytes::<f32>(&to_bytes(&net)).unwrap(), net);
    }

    #[test]
    fn rejects_corruption() {
        let net = Network::<f64>::init_uniform(
            &spec(ModeKind::Plain, ActivationKind::Relu),
            1.0,
            &mut RngStream::new(1, 1),
        )
        .unwrap();
        let bytes = to_bytes(&net);
        assert!(from_bytes::<f64>(&bytes[..bytes.len() - 3]).is_err());
        let mut bad = bytes.clone();
        bad[0] = b'X';
        assert!(from_bytes::<f64>(&bad).is_err());
        let mut extra = bytes;
        extra.push(0);
        assert!(from_bytes::<f64>(&extra).is_err());
    }

    #[test]
    fn file_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("net.bin");
        let net = Network::<f64>::init_uniform(
            &spec(ModeKind::AugmentedInput, ActivationKind::Relu),
            1.0,
            &mut RngStream::new(2, 2),
        )
        .unwrap();
        save(&net, &path).unwrap();
        assert_eq!(load::<f64>(&path).unwrap(), net);
    }
}
