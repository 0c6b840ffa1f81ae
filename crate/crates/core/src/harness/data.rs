//! Dataset sources: MNIST IDX files, seeded synthetic Gaussians, and label transforms.

use std::path::{Path, PathBuf};

use crate::error::{Error, Result};
use crate::nn::{LabelMode, LabeledDataset};
use crate::rng::RngStream;

const IMAGES_MAGIC: u32 = 0x0000_0803;
const LABELS_MAGIC: u32 = 0x0000_0801;

/// Number of digit classes in MNIST label files.
pub const DIGIT_CLASSES: usize = 10;

/// Conventional MNIST file names inside a directory.
pub const TRAIN_IMAGES: &str = "train-images-idx3-ubyte";
pub const TRAIN_LABELS: &str = "train-labels-idx1-ubyte";
pub const TEST_IMAGES: &str = "t10k-images-idx3-ubyte";
pub const TEST_LABELS: &str = "t10k-labels-idx1-ubyte";

struct IdxReader<'a> {
    path: &'a Path,
    bytes: Vec<u8>,
}

impl<'a> IdxReader<'a> {
    fn open(path: &'a Path) -> Result<Self> {
        let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
        Ok(IdxReader { path, bytes })
    }

    fn error(&self, offset: usize, message: impl Into<String>) -> Error {
        Error::Idx {
            path: self.path.to_path_buf(),
            offset: offset as u64,
            message: message.into(),
        }
    }

    fn need(&self, offset: usize, len: usize, what: &str) -> Result<()> {
        let available = self.bytes.len().saturating_sub(offset);
        if available < len {
            return Err(self.error(
                self.bytes.len(),
                format!(
                    "truncated {what}: needs {len} bytes from offset {offset}, {} missing",
                    len - available
                ),
            ));
        }
        Ok(())
    }

    fn u32_at(&self, offset: usize, what: &str) -> Result<u32> {
        self.need(offset, 4, what)?;
        let b = &self.bytes[offset..offset + 4];
        Ok(u32::from_be_bytes([b[0], b[1], b[2], b[3]]))
    }

    fn expect_magic(&self, magic: u32) -> Result<()> {
        let found = self.u32_at(0, "magic number")?;
        if found != magic {
            return Err(self.error(
                0,
                format!("wrong magic 0x{found:08x}, expected 0x{magic:08x}"),
            ));
        }
        Ok(())
    }
}

/// Reads an images file (`0x00000803`) and a labels file (`0x00000801`),
/// scaling pixels to `[0, 1]` by `/255`.
pub fn load_idx(images: &Path, labels: &Path) -> Result<LabeledDataset> {
    let img = IdxReader::open(images)?;
    img.expect_magic(IMAGES_MAGIC)?;
    let count = img.u32_at(4, "image count")? as usize;
    let rows = img.u32_at(8, "row count")? as usize;
    let cols = img.u32_at(12, "column count")? as usize;
    let dim = rows * cols;
    if dim == 0 {
        return Err(img.error(8, "images have zero pixels"));
    }
    img.need(16, count * dim, "pixel data")?;

    let lab = IdxReader::open(labels)?;
    lab.expect_magic(LABELS_MAGIC)?;
    let label_count = lab.u32_at(4, "label count")? as usize;
    if label_count != count {
        return Err(lab.error(
            4,
            format!("label count {label_count} does not match image count {count}"),
        ));
    }
    lab.need(8, count, "label data")?;
    let raw_labels = &lab.bytes[8..8 + count];
    if let Some(i) = raw_labels.iter().position(|&y| y as usize >= DIGIT_CLASSES) {
        return Err(lab.error(8 + i, format!("label {} is not a digit", raw_labels[i])));
    }
    let features: Vec<f64> = img.bytes[16..16 + count * dim]
        .iter()
        .map(|&b| b as f64 / 255.0)
        .collect();
    let labels = raw_labels.iter().map(|&y| y as usize).collect();
    LabeledDataset::new(features, dim, labels, DIGIT_CLASSES)
}

/// Loads the standard train and test files from `dir`.
pub fn load_mnist_dir(dir: &Path) -> Result<(LabeledDataset, LabeledDataset)> {
    let path = |name: &str| -> PathBuf { dir.join(name) };
    Ok((
        load_idx(&path(TRAIN_IMAGES), &path(TRAIN_LABELS))?,
        load_idx(&path(TEST_IMAGES), &path(TEST_LABELS))?,
    ))
}

/// Shifts and scales every feature to zero mean and unit variance on `train`,
/// applying the same map to `test`. Constant features are only centered.
pub fn standardize(train: &mut LabeledDataset, test: &mut LabeledDataset) -> Result<()> {
    if train.dim() != test.dim() {
        return Err(Error::DimensionMismatch {
            what: "test feature dimension",
            expected: train.dim(),
            got: test.dim(),
        });
    }
    let d = train.dim();
    let m = train.len() as f64;
    let mut mean = vec![0.0; d];
    for row in train.features().chunks_exact(d) {
        for (mu, x) in mean.iter_mut().zip(row) {
            *mu += x / m;
        }
    }
    let mut scale = vec![0.0; d];
    for row in train.features().chunks_exact(d) {
        for ((s, x), mu) in scale.iter_mut().zip(row).zip(&mean) {
            *s += (x - mu).powi(2) / m;
        }
    }
    for s in &mut scale {
        *s = if *s > 0.0 { 1.0 / s.sqrt() } else { 1.0 };
    }
    for ds in [train, test] {
        for row in ds.features_mut().chunks_exact_mut(d) {
            for ((x, mu), s) in row.iter_mut().zip(&mean).zip(&scale) {
                *x = (*x - mu) * s;
            }
        }
    }
    Ok(())
}

/// Maps digits 0-4 to class 1 and 5-9 to class 0.
pub fn binarize_labels(ds: &LabeledDataset) -> Result<LabeledDataset> {
    if ds.num_classes() != DIGIT_CLASSES {
        return Err(Error::InvalidArgument(format!(
            "binarization needs {DIGIT_CLASSES}-class digit labels, got {} classes",
            ds.num_classes()
        )));
    }
    let labels = ds.labels().iter().map(|&y| usize::from(y <= 4)).collect();
    ds.with_labels(labels, 2, ds.label_mode())
}

/// Replaces every label by an independent uniform draw from the seed.
pub fn randomize_labels(ds: &LabeledDataset, seed: u64) -> Result<LabeledDataset> {
    let mut rng = RngStream::new(seed);
    let k = ds.num_classes();
    let labels = (0..ds.len()).map(|_| rng.below(k)).collect();
    ds.with_labels(labels, k, LabelMode::RandomLabels { seed })
}

/// The first `n` examples after a seeded shuffle.
pub fn seeded_subset(ds: &LabeledDataset, n: usize, seed: u64) -> Result<LabeledDataset> {
    if n == 0 || n > ds.len() {
        return Err(Error::InvalidConfig(format!(
            "subset size {n} must lie in 1..={}",
            ds.len()
        )));
    }
    let mut order: Vec<usize> = (0..ds.len()).collect();
    RngStream::new(seed).shuffle(&mut order);
    order.truncate(n);
    ds.select(&order)
}

fn gaussian_classes(
    m: usize,
    d: usize,
    separation: f64,
    rng: &mut RngStream,
) -> Result<LabeledDataset> {
    let mut features = rng.standard_normal_vec(m * d);
    let labels: Vec<usize> = (0..m).map(|i| i % 2).collect();
    for (row, &y) in features.chunks_exact_mut(d).zip(&labels) {
        row[0] += if y == 1 {
            0.5 * separation
        } else {
            -0.5 * separation
        };
    }
    LabeledDataset::new(features, d, labels, 2)
}

/// Two balanced isotropic Gaussian classes with means `+-(separation/2) e_1`;
/// class 1 sits on the positive side. Train and test (each of size `m`) use
/// independent streams derived from `seed`.
pub fn synthetic_gaussians(
    m: usize,
    d: usize,
    separation: f64,
    seed: u64,
) -> Result<(LabeledDataset, LabeledDataset)> {
    synthetic_gaussians_sized(m, m, d, separation, seed)
}

/// [`synthetic_gaussians`] with a separate test size.
pub fn synthetic_gaussians_sized(
    m: usize,
    m_test: usize,
    d: usize,
    separation: f64,
    seed: u64,
) -> Result<(LabeledDataset, LabeledDataset)> {
    if m == 0 || !m.is_multiple_of(2) || m_test == 0 || !m_test.is_multiple_of(2) {
        return Err(Error::InvalidConfig(format!(
            "synthetic sizes must be even and positive, got {m} and {m_test}"
        )));
    }
    if d == 0 {
        return Err(Error::InvalidConfig(
            "synthetic dimension must be positive".into(),
        ));
    }
    if !(separation >= 0.0 && separation.is_finite()) {
        return Err(Error::InvalidConfig(format!(
            "separation must be finite and >= 0, got {separation}"
        )));
    }
    let root = RngStream::new(seed);
    let train = gaussian_classes(m, d, separation, &mut root.fork(0))?;
    let test = gaussian_classes(m_test, d, separation, &mut root.fork(1))?;
    Ok((train, test))
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::io::Write;

    fn write(dir: &Path, name: &str, bytes: &[u8]) -> PathBuf {
        let path = dir.join(name);
        std::fs::File::create(&path)
            .unwrap()
            .write_all(bytes)
            .unwrap();
        path
    }

    fn idx_images(count: u32, rows: u32, cols: u32, pixels: &[u8]) -> Vec<u8> {
        let mut out = Vec::new();
        for v in [IMAGES_MAGIC, count, rows, cols] {
            out.extend_from_slice(&v.to_be_bytes());
        }
        out.extend_from_slice(pixels);
        out
    }

    fn idx_labels(labels: &[u8]) -> Vec<u8> {
        let mut out = Vec::new();
        out.extend_from_slice(&LABELS_MAGIC.to_be_bytes());
        out.extend_from_slice(&(labels.len() as u32).to_be_bytes());
        out.extend_from_slice(labels);
        out
    }

    #[test]
    fn reads_a_tiny_idx_pair() {
        let dir = tempfile::tempdir().unwrap();
        let img = write(dir.path(), "img", &idx_images(2, 1, 2, &[0, 255, 51, 102]));
        let lab = write(dir.path(), "lab", &idx_labels(&[3, 7]));
        let ds = load_idx(&img, &lab).unwrap();
        assert_eq!((ds.len(), ds.dim(), ds.num_classes()), (2, 2, 10));
        assert_eq!(ds.features(), &[0.0, 1.0, 0.2, 0.4]);
        let bin = binarize_labels(&ds).unwrap();
        assert_eq!(bin.labels(), &[1, 0]);
        assert!(binarize_labels(&bin).is_err());
    }

    #[test]
    fn truncation_names_the_offset() {
        let dir = tempfile::tempdir().unwrap();
        let mut bytes = idx_images(2, 2, 2, &[0; 8]);
        bytes.truncate(bytes.len() - 3);
        let img = write(dir.path(), "img", &bytes);
        let lab = write(dir.path(), "lab", &idx_labels(&[1, 2]));
        match load_idx(&img, &lab).unwrap_err() {
            Error::Idx {
                offset, message, ..
            } => {
                assert_eq!(offset, 21);
                assert!(message.contains("3 missing"), "{message}");
            }
            other => panic!("unexpected error {other}"),
        }
    }

    #[test]
    fn wrong_magic_is_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let img = write(dir.path(), "img", &idx_labels(&[1, 2]));
        let lab = write(dir.path(), "lab", &idx_labels(&[1, 2]));
        let err = load_idx(&img, &lab).unwrap_err().to_string();
        assert!(err.contains("wrong magic"), "{err}");
    }

    #[test]
    fn count_mismatch_is_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let img = write(dir.path(), "img", &idx_images(2, 1, 1, &[0, 0]));
        let lab = write(dir.path(), "lab", &idx_labels(&[1, 2, 3]));
        assert!(load_idx(&img, &lab)
            .unwrap_err()
            .to_string()
            .contains("does not match"));
    }

    #[test]
    fn random_labels_are_seeded_and_balanced() {
        let (train, _) = synthetic_gaussians(10_000, 2, 1.0, 4).unwrap();
        let a = randomize_labels(&train, 17).unwrap();
        let b = randomize_labels(&train, 17).unwrap();
        assert_eq!(a.labels(), b.labels());
        assert_eq!(a.features(), train.features());
        let ones = a.labels().iter().sum::<usize>() as f64 / 10_000.0;
        assert!((ones - 0.5).abs() < 4.0 * (0.25f64 / 10_000.0).sqrt());
        assert_eq!(a.label_mode(), LabelMode::RandomLabels { seed: 17 });
    }

    #[test]
    fn synthetic_data_is_deterministic_and_balanced() {
        let (a, at) = synthetic_gaussians(100, 3, 6.0, 1).unwrap();
        let (b, _) = synthetic_gaussians(100, 3, 6.0, 1).unwrap();
        assert_eq!(a.features(), b.features());
        assert_ne!(a.features(), at.features());
        assert_eq!(a.labels().iter().sum::<usize>(), 50);
        assert!(synthetic_gaussians(7, 3, 1.0, 0).is_err());
    }

    #[test]
    fn standardization_is_fit_on_train() {
        let (mut train, mut test) = synthetic_gaussians(1000, 2, 4.0, 3).unwrap();
        standardize(&mut train, &mut test).unwrap();
        let mean0 = train.features().chunks(2).map(|r| r[0]).sum::<f64>() / 1000.0;
        let var0 = train.features().chunks(2).map(|r| r[0] * r[0]).sum::<f64>() / 1000.0;
        assert!(mean0.abs() < 1e-12 && (var0 - 1.0).abs() < 1e-12);
    }

    #[test]
    fn subsets_are_seeded() {
        let (train, _) = synthetic_gaussians(100, 2, 1.0, 0).unwrap();
        let a = seeded_subset(&train, 10, 5).unwrap();
        assert_eq!(
            a.features(),
            seeded_subset(&train, 10, 5).unwrap().features()
        );
        assert!(seeded_subset(&train, 101, 5).is_err());
    }
}
