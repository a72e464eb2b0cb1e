//! MNIST IDX ingestion.
//!
//! Images: big-endian `0x00000803`, count, rows, cols, then `u8` pixels.
//! Labels: big-endian `0x00000801`, count, then `u8` digits.

use std::path::{Path, PathBuf};

use crate::data::{Label, LabelSet, LabeledDataset};
use crate::error::{Error, Result};
use crate::linalg::Vector;
use crate::scalar::Scalar;

pub const IMAGES_MAGIC: u32 = 0x0000_0803;
pub const LABELS_MAGIC: u32 = 0x0000_0801;

pub const TRAIN_IMAGES: &str = "train-images-idx3-ubyte";
pub const TRAIN_LABELS: &str = "train-labels-idx1-ubyte";
pub const TEST_IMAGES: &str = "t10k-images-idx3-ubyte";
pub const TEST_LABELS: &str = "t10k-labels-idx1-ubyte";

fn idx_err(path: &Path, reason: impl Into<String>) -> Error {
    Error::Idx {
        path: path.display().to_string(),
        reason: reason.into(),
    }
}

fn header(bytes: &[u8], path: &Path, magic: u32, dims: usize) -> Result<Vec<usize>> {
    let need = 4 * (1 + dims);
    if bytes.len() < need {
        return Err(idx_err(path, format!("header truncated: {} bytes", bytes.len())));
    }
    let word = |i: usize| u32::from_be_bytes(bytes[4 * i..4 * i + 4].try_into().expect("4 bytes"));
    if word(0) != magic {
        return Err(idx_err(path, format!("bad magic {:#010x}, expected {magic:#010x}", word(0))));
    }
    Ok((1..=dims).map(|i| word(i) as usize).collect())
}

/// Parsed image file: `count` images of `rows * cols` pixels scaled to `[0, 1]`.
pub fn parse_images<T: Scalar>(bytes: &[u8], path: &Path, limit: Option<usize>) -> Result<Vec<Vector<T>>> {
    let dims = header(bytes, path, IMAGES_MAGIC, 3)?;
    let (count, pixels) = (dims[0], dims[1] * dims[2]);
    if pixels == 0 {
        return Err(idx_err(path, "zero-sized images"));
    }
    let body = &bytes[16..];
    if body.len() != count * pixels {
        return Err(idx_err(
            path,
            format!("expected {} pixel bytes, found {}", count * pixels, body.len()),
        ));
    }
    let n = limit.map_or(count, |l| l.min(count));
    let scale = T::cast(1.0 / 255.0);
    Ok(body
        .chunks_exact(pixels)
        .take(n)
        .map(|img| Vector::from_vec_unchecked(img.iter().map(|&b| T::cast(b as f64) * scale).collect()))
        .collect())
}

pub fn parse_labels(bytes: &[u8], path: &Path, limit: Option<usize>) -> Result<Vec<Label>> {
    let count = header(bytes, path, LABELS_MAGIC, 1)?[0];
    let body = &bytes[8..];
    if body.len() != count {
        return Err(idx_err(path, format!("expected {count} labels, found {}", body.len())));
    }
    if let Some(bad) = body.iter().find(|&&b| b > 9) {
        return Err(idx_err(path, format!("label {bad} outside 0..=9")));
    }
    let n = limit.map_or(count, |l| l.min(count));
    Ok(body[..n].iter().map(|&b| Label::Class(b)).collect())
}

pub fn load_mnist_idx<T: Scalar>(
    images_path: impl AsRef<Path>,
    labels_path: impl AsRef<Path>,
    limit: Option<usize>,
) -> Result<LabeledDataset<T>> {
    let (ip, lp) = (images_path.as_ref(), labels_path.as_ref());
    let read = |p: &Path| std::fs::read(p).map_err(|e| idx_err(p, e.to_string()));
    let images = parse_images(&read(ip)?, ip, limit)?;
    let labels = parse_labels(&read(lp)?, lp, limit)?;
    if images.len() != labels.len() {
        return Err(idx_err(
            lp,
            format!("{} images but {} labels", images.len(), labels.len()),
        ));
    }
    LabeledDataset::new(
        ip.file_name().map_or("mnist".into(), |s| s.to_string_lossy().into_owned()),
        images,
        labels,
        LabelSet::Classes(10),
    )
}

/// Train and test file paths under `dir`.
pub fn mnist_paths(dir: &Path) -> [(PathBuf, PathBuf); 2] {
    [
        (dir.join(TRAIN_IMAGES), dir.join(TRAIN_LABELS)),
        (dir.join(TEST_IMAGES), dir.join(TEST_LABELS)),
    ]
}

/// Serialize in IDX format; used by tests and the conversion tooling.
pub fn encode_images(images: &[Vec<u8>], rows: usize, cols: usize) -> Vec<u8> {
    let mut out = Vec::with_capacity(16 + images.len() * rows * cols);
    for w in [IMAGES_MAGIC, images.len() as u32, rows as u32, cols as u32] {
        out.extend_from_slice(&w.to_be_bytes());
    }
    for img in images {
        out.extend_from_slice(img);
    }
    out
}

pub fn encode_labels(labels: &[u8]) -> Vec<u8> {
    let mut out = Vec::with_capacity(8 + labels.len());
    out.extend_from_slice(&LABELS_MAGIC.to_be_bytes());
    out.extend_from_slice(&(labels.len() as u32).to_be_bytes());
    out.extend_from_slice(labels);
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    fn fixture(n: usize) -> (Vec<u8>, Vec<u8>) {
        let imgs: Vec<Vec<u8>> = (0..n).map(|i| vec![(i % 256) as u8, 255, 0, 51]).collect();
        let labels: Vec<u8> = (0..n).map(|i| (i % 10) as u8).collect();
        (encode_images(&imgs, 2, 2), encode_labels(&labels))
    }

    #[test]
    fn parses_and_scales() {
        let (im, lb) = fixture(3);
        let p = Path::new("x");
        let xs = parse_images::<f64>(&im, p, None).unwrap();
        assert_eq!(xs.len(), 3);
        assert_eq!(xs[1].as_slice(), &[1.0 / 255.0, 1.0, 0.0, 0.2]);
        assert_eq!(parse_labels(&lb, p, None).unwrap()[2], Label::Class(2));
    }

    #[test]
    fn limit_preserves_order() {
        let (im, lb) = fixture(150);
        let p = Path::new("x");
        let xs = parse_images::<f64>(&im, p, Some(100)).unwrap();
        let ys = parse_labels(&lb, p, Some(100)).unwrap();
        assert_eq!((xs.len(), ys.len()), (100, 100));
        assert_eq!(ys[99], Label::Class(9));
        assert_eq!(xs[99][0], 99.0 / 255.0);
    }

    #[test]
    fn rejects_wrong_magic_and_truncation() {
        let (im, lb) = fixture(2);
        let p = Path::new("x");
        assert!(parse_labels(&im, p, None).is_err());
        assert!(parse_images::<f64>(&lb, p, None).is_err());
        assert!(parse_images::<f64>(&im[..im.len() - 1], p, None).is_err());
        assert!(parse_labels(&lb[..6], p, None).is_err());
        let mut bad = lb.clone();
        bad[8] = 10;
        assert!(parse_labels(&bad, p, None).is_err());
    }

    #[test]
    fn count_mismatch_between_files_is_an_error() {
        let dir = tempfile::tempdir().unwrap();
        let (im, _) = fixture(3);
        let (_, lb) = fixture(4);
        std::fs::write(dir.path().join("i"), im).unwrap();
        std::fs::write(dir.path().join("l"), lb).unwrap();
        let err = load_mnist_idx::<f64>(dir.path().join("i"), dir.path().join("l"), None).unwrap_err();
        assert!(err.to_string().contains("3 images but 4 labels"), "{err}");
        assert!(load_mnist_idx::<f64>(dir.path().join("i"), dir.path().join("nope"), None).is_err());
    }
}
