//! MNIST/Fashion-MNIST loading and deterministic cyclic batch streams.
//!
//! Datasets are parsed from the canonical IDX container (optionally
//! gzipped) into flat `f32` matrices with pixel intensities in `[0, 1]`.
//! A [`BatchStream`] serves fixed-size batches forever: when a shuffled
//! pass runs out mid-batch it reshuffles and keeps filling the same
//! batch, so batches never run short and training sequences continue
//! across epoch boundaries.

use std::fmt;
use std::io::Read;
use std::path::Path;
use std::sync::Arc;

use ndarray::{Array2, ArrayView1, ArrayView2};
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};

/// Side length of the input images.
pub const IMAGE_SIDE: usize = 28;
/// Flattened input dimensionality.
pub const IMAGE_PIXELS: usize = IMAGE_SIDE * IMAGE_SIDE;
/// Number of classes, and the number of leading pixels a label overlay uses.
pub const NUM_CLASSES: usize = 10;

const IDX_IMAGE_MAGIC: u32 = 0x0000_0803;
const IDX_LABEL_MAGIC: u32 = 0x0000_0801;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum DatasetName {
    Mnist,
    FashionMnist,
}

impl DatasetName {
    /// Directory name under the dataset root.
    pub fn dir_name(&self) -> &'static str {
        match self {
            DatasetName::Mnist => "mnist",
            DatasetName::FashionMnist => "fashion-mnist",
        }
    }
}

impl fmt::Display for DatasetName {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.dir_name())
    }
}

impl std::str::FromStr for DatasetName {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "mnist" => Ok(DatasetName::Mnist),
            "fashion-mnist" | "fashion_mnist" => Ok(DatasetName::FashionMnist),
            other => Err(Error::InvalidArgument(format!(
                "unknown dataset {other:?} (expected mnist or fashion-mnist)"
            ))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Split {
    Train,
    Test,
}

impl Split {
    fn file_prefix(&self) -> &'static str {
        match self {
            Split::Train => "train",
            Split::Test => "t10k",
        }
    }

    fn canonical_len(&self) -> usize {
        match self {
            Split::Train => 60_000,
            Split::Test => 10_000,
        }
    }
}

impl fmt::Display for Split {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Split::Train => f.write_str("train"),
            Split::Test => f.write_str("test"),
        }
    }
}

/// One flattened image plus its class label.
#[derive(Debug, Clone, PartialEq)]
pub struct Sample {
    pub pixels: Vec<f32>,
    pub label: u8,
}

/// An immutable, shareable set of samples with a common 784-pixel shape.
#[derive(Debug, Clone)]
pub struct Dataset {
    pixels: Array2<f32>,
    labels: Vec<u8>,
    name: DatasetName,
    split: Split,
}

impl Dataset {
    /// Builds a dataset from already-decoded parts. Counts are not forced
    /// to the canonical sizes here; [`Dataset::load`] does that check for
    /// files read from disk.
    pub fn from_parts(
        name: DatasetName,
        split: Split,
        pixels: Array2<f32>,
        labels: Vec<u8>,
    ) -> Result<Self> {
        if pixels.ncols() != IMAGE_PIXELS {
            return Err(Error::InvalidArgument(format!(
                "expected {IMAGE_PIXELS} pixels per sample, got {}",
                pixels.ncols()
            )));
        }
        if pixels.nrows() != labels.len() {
            return Err(Error::Pairing {
                images: pixels.nrows(),
                labels: labels.len(),
            });
        }
        if let Some(bad) = labels.iter().find(|&&l| l > 9) {
            return Err(Error::InvalidArgument(format!("label {bad} out of range")));
        }
        Ok(Dataset {
            pixels,
            labels,
            name,
            split,
        })
    }

    /// Loads one split from `<root>/<dataset>/{train,t10k}-{images,labels}-idx?-ubyte[.gz]`
    /// and verifies the canonical sample counts.
    pub fn load(root: &Path, name: DatasetName, split: Split) -> Result<Self> {
        let dir = root.join(name.dir_name());
        let images = read_maybe_gz(&dir.join(format!("{}-images-idx3-ubyte", split.file_prefix())))?;
        let labels = read_maybe_gz(&dir.join(format!("{}-labels-idx1-ubyte", split.file_prefix())))?;
        let pixels = load_idx_images(&images)?;
        let labels = load_idx_labels(&labels)?;
        if pixels.nrows() != labels.len() {
            return Err(Error::Pairing {
                images: pixels.nrows(),
                labels: labels.len(),
            });
        }
        let ds = Dataset {
            pixels,
            labels,
            name,
            split,
        };
        if ds.len() != split.canonical_len() {
            return Err(Error::InvalidArgument(format!(
                "{name} {split} split has {} samples, expected {}",
                ds.len(),
                split.canonical_len()
            )));
        }
        Ok(ds)
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn name(&self) -> DatasetName {
        self.name
    }

    pub fn split(&self) -> Split {
        self.split
    }

    pub fn pixels(&self) -> ArrayView2<'_, f32> {
        self.pixels.view()
    }

    pub fn labels(&self) -> &[u8] {
        &self.labels
    }

    pub fn pixel_row(&self, index: usize) -> ArrayView1<'_, f32> {
        self.pixels.row(index)
    }

    pub fn sample(&self, index: usize) -> Sample {
        Sample {
            pixels: self.pixels.row(index).to_vec(),
            label: self.labels[index],
        }
    }
}

/// Reads a file, transparently gunzipping either a `.gz` sibling or a
/// gzip payload stored under the plain name.
fn read_maybe_gz(path: &Path) -> Result<Vec<u8>> {
    let bytes = if path.exists() {
        std::fs::read(path)?
    } else {
        let gz = path.with_extension(gz_extension(path));
        if !gz.exists() {
            return Err(Error::Io(std::io::Error::new(
                std::io::ErrorKind::NotFound,
                format!("dataset not found: {} (also tried .gz)", path.display()),
            )));
        }
        std::fs::read(gz)?
    };
    if bytes.starts_with(&[0x1f, 0x8b]) {
        let mut out = Vec::new();
        flate2::read::GzDecoder::new(&bytes[..]).read_to_end(&mut out)?;
        Ok(out)
    } else {
        Ok(bytes)
    }
}

fn gz_extension(path: &Path) -> String {
    match path.extension() {
        Some(ext) => format!("{}.gz", ext.to_string_lossy()),
        None => "gz".to_string(),
    }
}

fn be_u32(bytes: &[u8], offset: usize, field: &'static str) -> Result<u32> {
    let end = offset + 4;
    if bytes.len() < end {
        return Err(Error::IdxParse {
            field,
            detail: format!("file truncated at byte {offset}"),
        });
    }
    Ok(u32::from_be_bytes(bytes[offset..end].try_into().unwrap()))
}

/// Parses an IDX3 image file into a `count x 784` matrix with intensities
/// mapped from `0..=255` to `[0, 1]`.
pub fn load_idx_images(bytes: &[u8]) -> Result<Array2<f32>> {
    let magic = be_u32(bytes, 0, "magic")?;
    if magic != IDX_IMAGE_MAGIC {
        return Err(Error::IdxParse {
            field: "magic",
            detail: format!("expected {IDX_IMAGE_MAGIC:#010x}, got {magic:#010x}"),
        });
    }
    let count = be_u32(bytes, 4, "count")? as usize;
    let rows = be_u32(bytes, 8, "rows")? as usize;
    let cols = be_u32(bytes, 12, "cols")? as usize;
    if rows != IMAGE_SIDE {
        return Err(Error::IdxParse {
            field: "rows",
            detail: format!("expected {IMAGE_SIDE}, got {rows}"),
        });
    }
    if cols != IMAGE_SIDE {
        return Err(Error::IdxParse {
            field: "cols",
            detail: format!("expected {IMAGE_SIDE}, got {cols}"),
        });
    }
    let expected = 16 + count * IMAGE_PIXELS;
    if bytes.len() < expected {
        return Err(Error::IdxParse {
            field: "pixel data",
            detail: format!(
                "header declares {count} images ({expected} bytes), file has {}",
                bytes.len()
            ),
        });
    }
    let data: Vec<f32> = bytes[16..expected]
        .iter()
        .map(|&b| f32::from(b) / 255.0)
        .collect();
    Ok(Array2::from_shape_vec((count, IMAGE_PIXELS), data).expect("shape checked above"))
}

/// Parses an IDX1 label file; every label must be a digit class `0..=9`.
pub fn load_idx_labels(bytes: &[u8]) -> Result<Vec<u8>> {
    let magic = be_u32(bytes, 0, "magic")?;
    if magic != IDX_LABEL_MAGIC {
        return Err(Error::IdxParse {
            field: "magic",
            detail: format!("expected {IDX_LABEL_MAGIC:#010x}, got {magic:#010x}"),
        });
    }
    let count = be_u32(bytes, 4, "count")? as usize;
    let expected = 8 + count;
    if bytes.len() < expected {
        return Err(Error::IdxParse {
            field: "label data",
            detail: format!(
                "header declares {count} labels ({expected} bytes), file has {}",
                bytes.len()
            ),
        });
    }
    let labels = bytes[8..expected].to_vec();
    if let Some((i, bad)) = labels.iter().enumerate().find(|(_, &l)| l > 9) {
        return Err(Error::IdxParse {
            field: "label data",
            detail: format!("label {bad} at index {i} out of range 0..=9"),
        });
    }
    Ok(labels)
}

/// A fixed-size batch of raw samples.
#[derive(Debug, Clone)]
pub struct Batch {
    /// `batch_size x 784` pixel matrix.
    pub pixels: Array2<f32>,
    pub labels: Vec<u8>,
}

impl Batch {
    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }
}

/// One round of splitmix64; used to derive independent stream seeds from
/// a base seed without correlated low bits.
pub fn mix_seed(base: u64, salt: u64) -> u64 {
    let mut z = base
        .wrapping_add(salt.wrapping_mul(0x9e37_79b9_7f4a_7c15))
        .wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// An infinite, deterministic stream of batches over one dataset.
///
/// Each pass visits every sample exactly once in an order shuffled by an
/// RNG derived from `(seed, pass_index)`. When a pass runs out mid-batch
/// the stream reshuffles and keeps filling the same batch, so every batch
/// has exactly `batch_size` samples and the final partial pass continues
/// into the next one.
#[derive(Debug, Clone)]
pub struct BatchStream {
    data: Arc<Dataset>,
    batch_size: usize,
    seed: u64,
    order: Vec<u32>,
    cursor: usize,
    epochs_completed: u64,
    samples_drawn: u64,
}

impl BatchStream {
    pub fn new(data: Arc<Dataset>, batch_size: usize, seed: u64) -> Result<Self> {
        if data.is_empty() {
            return Err(Error::InvalidArgument("empty dataset".into()));
        }
        if batch_size == 0 {
            return Err(Error::InvalidArgument("batch_size must be >= 1".into()));
        }
        let mut stream = BatchStream {
            order: (0..data.len() as u32).collect(),
            data,
            batch_size,
            seed,
            cursor: 0,
            epochs_completed: 0,
            samples_drawn: 0,
        };
        stream.shuffle_current_pass();
        Ok(stream)
    }

    fn shuffle_current_pass(&mut self) {
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        rng.set_stream(self.epochs_completed);
        self.order.shuffle(&mut rng);
    }

    /// Number of completed full passes over the dataset.
    pub fn epochs_completed(&self) -> u64 {
        self.epochs_completed
    }

    pub fn samples_drawn(&self) -> u64 {
        self.samples_drawn
    }

    pub fn batch_size(&self) -> usize {
        self.batch_size
    }

    pub fn dataset(&self) -> &Arc<Dataset> {
        &self.data
    }

    fn next_index(&mut self) -> usize {
        let idx = self.order[self.cursor] as usize;
        self.cursor += 1;
        self.samples_drawn += 1;
        if self.cursor == self.order.len() {
            self.epochs_completed += 1;
            self.shuffle_current_pass();
            self.cursor = 0;
        }
        idx
    }

    /// Draws the next `n` samples, wrapping across pass boundaries.
    pub fn next_batch_sized(&mut self, n: usize) -> Batch {
        let mut pixels = Array2::<f32>::zeros((n, IMAGE_PIXELS));
        let mut labels = Vec::with_capacity(n);
        for row in 0..n {
            let idx = self.next_index();
            pixels.row_mut(row).assign(&self.data.pixel_row(idx));
            labels.push(self.data.labels()[idx]);
        }
        Batch { pixels, labels }
    }

    /// Draws the next `batch_size` samples.
    pub fn next_batch(&mut self) -> Batch {
        self.next_batch_sized(self.batch_size)
    }
}
