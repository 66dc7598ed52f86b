//! Positive and negative sample synthesis.
//!
//! Positive inputs optionally carry a one-hot class overlay in the first
//! ten pixels. Negative inputs come from one of two strategies: the same
//! overlay with a deliberately wrong class, or blobby hybrids of two
//! images blended through a blurred-noise binary mask.

use ndarray::Array2;
use rand::Rng;

use crate::data::{Batch, BatchStream, Sample, IMAGE_PIXELS, IMAGE_SIDE, NUM_CLASSES};
use crate::error::{Error, Result};

/// Default number of blur passes when building masks.
pub const DEFAULT_BLUR_ITERATIONS: u32 = 3;

/// How negative samples are produced.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum NegStrategy {
    /// Real image with an incorrect class overlaid on the first ten pixels.
    WrongLabel,
    /// Two real images blended through a blurred binary mask.
    Masks { blur_iterations: u32 },
}

impl NegStrategy {
    pub fn masks_default() -> Self {
        NegStrategy::Masks {
            blur_iterations: DEFAULT_BLUR_ITERATIONS,
        }
    }

    pub fn kind_name(&self) -> &'static str {
        match self {
            NegStrategy::WrongLabel => "wrong-label",
            NegStrategy::Masks { .. } => "masks",
        }
    }

    /// Whether positive batches carry true-label overlays under this
    /// strategy's default pairing (wrong-label training is supervised,
    /// masks training is not).
    pub fn overlays_positives(&self) -> bool {
        matches!(self, NegStrategy::WrongLabel)
    }
}

impl std::fmt::Display for NegStrategy {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.kind_name())
    }
}

/// Writes a one-hot overlay for `label` into the first ten pixels.
pub fn overlay_label_row(pixels: &mut [f32], label: u8) {
    for p in pixels[..NUM_CLASSES].iter_mut() {
        *p = 0.0;
    }
    pixels[label as usize] = 1.0;
}

/// Returns a copy of `sample` with pixels 0..10 replaced by a one-hot
/// overlay of `label`; the body (pixels 10..784) is untouched.
pub fn overlay_label(sample: &Sample, label: u8) -> Result<Sample> {
    if label > 9 {
        return Err(Error::InvalidArgument(format!(
            "overlay label {label} out of range 0..=9"
        )));
    }
    let mut pixels = sample.pixels.clone();
    overlay_label_row(&mut pixels, label);
    Ok(Sample { pixels, label })
}

/// Draws a label uniformly from the nine classes other than `true_label`.
pub fn wrong_label<R: Rng + ?Sized>(true_label: u8, rng: &mut R) -> u8 {
    let draw = rng.random_range(0..NUM_CLASSES as u8 - 1);
    draw + u8::from(draw >= true_label)
}

/// Returns `sample` overlaid with a uniformly random wrong label.
pub fn gen_wrong_label<R: Rng + ?Sized>(sample: &Sample, rng: &mut R) -> Sample {
    let label = wrong_label(sample.label, rng);
    overlay_label(sample, label).expect("wrong_label stays in range")
}

fn blur_pass(grid: &mut [f32], tmp: &mut [f32]) {
    for r in 0..IMAGE_SIDE {
        for c in 0..IMAGE_SIDE {
            let left = grid[r * IMAGE_SIDE + c.saturating_sub(1)];
            let mid = grid[r * IMAGE_SIDE + c];
            let right = grid[r * IMAGE_SIDE + (c + 1).min(IMAGE_SIDE - 1)];
            tmp[r * IMAGE_SIDE + c] = 0.25 * left + 0.5 * mid + 0.25 * right;
        }
    }
    for c in 0..IMAGE_SIDE {
        for r in 0..IMAGE_SIDE {
            let up = tmp[r.saturating_sub(1) * IMAGE_SIDE + c];
            let mid = tmp[r * IMAGE_SIDE + c];
            let down = tmp[(r + 1).min(IMAGE_SIDE - 1) * IMAGE_SIDE + c];
            grid[r * IMAGE_SIDE + c] = 0.25 * up + 0.5 * mid + 0.25 * down;
        }
    }
}

fn blur_grid(grid: &mut [f32], iterations: u32) {
    let mut tmp = vec![0.0f32; grid.len()];
    for _ in 0..iterations {
        blur_pass(grid, &mut tmp);
    }
}

fn threshold_grid(grid: &mut [f32]) {
    for v in grid.iter_mut() {
        *v = if *v >= 0.5 { 1.0 } else { 0.0 };
    }
}

/// Generates a 784-pixel binary mask: i.i.d. uniform bits on the 28x28
/// grid, `blur_iterations` passes of the separable [1/4, 1/2, 1/4] filter
/// (horizontal then vertical, replicated edges), then a 0.5 threshold
/// with ties rounding to 1.
pub fn gen_mask<R: Rng + ?Sized>(rng: &mut R, blur_iterations: u32) -> Vec<f32> {
    let mut grid: Vec<f32> = (0..IMAGE_PIXELS)
        .map(|_| if rng.random::<bool>() { 1.0 } else { 0.0 })
        .collect();
    blur_grid(&mut grid, blur_iterations);
    threshold_grid(&mut grid);
    grid
}

/// Blends two images through a binary mask: `mask*a + (1-mask)*b`.
pub fn gen_hybrid(a: &[f32], b: &[f32], mask: &[f32]) -> Result<Vec<f32>> {
    if a.len() != IMAGE_PIXELS || b.len() != IMAGE_PIXELS || mask.len() != IMAGE_PIXELS {
        return Err(Error::InvalidArgument(format!(
            "hybrid inputs must all have {IMAGE_PIXELS} pixels, got {}/{}/{}",
            a.len(),
            b.len(),
            mask.len()
        )));
    }
    Ok((0..IMAGE_PIXELS)
        .map(|i| mask[i] * a[i] + (1.0 - mask[i]) * b[i])
        .collect())
}

/// Draws the next positive batch, overlaying each sample's own label when
/// `overlay_labels` is set.
pub fn positive_batch(stream: &mut BatchStream, overlay_labels: bool) -> Batch {
    let mut batch = stream.next_batch();
    if overlay_labels {
        for (mut row, &label) in batch.pixels.rows_mut().into_iter().zip(&batch.labels) {
            overlay_label_row(row.as_slice_mut().expect("rows are contiguous"), label);
        }
    }
    batch
}

/// Draws the next negative batch for `strategy`.
///
/// WrongLabel overlays each drawn sample with a random incorrect class.
/// Masks draws twice the batch size and blends consecutive disjoint
/// pairs through fresh masks; the reported labels are the first source's
/// and carry no training meaning.
pub fn negative_batch<R: Rng + ?Sized>(
    strategy: NegStrategy,
    stream: &mut BatchStream,
    rng: &mut R,
) -> Batch {
    match strategy {
        NegStrategy::WrongLabel => {
            let mut batch = stream.next_batch();
            for (mut row, label) in batch.pixels.rows_mut().into_iter().zip(&mut batch.labels) {
                let wrong = wrong_label(*label, rng);
                overlay_label_row(row.as_slice_mut().expect("rows are contiguous"), wrong);
                *label = wrong;
            }
            batch
        }
        NegStrategy::Masks { blur_iterations } => {
            let n = stream.batch_size();
            let pairs = stream.next_batch_sized(2 * n);
            let mut pixels = Array2::<f32>::zeros((n, IMAGE_PIXELS));
            let mut labels = Vec::with_capacity(n);
            for i in 0..n {
                let mask = gen_mask(rng, blur_iterations);
                let a = pairs.pixels.row(2 * i);
                let b = pairs.pixels.row(2 * i + 1);
                let hybrid = gen_hybrid(
                    a.as_slice().expect("rows are contiguous"),
                    b.as_slice().expect("rows are contiguous"),
                    &mask,
                )
                .expect("shapes fixed at 784");
                pixels
                    .row_mut(i)
                    .assign(&ndarray::ArrayView1::from(&hybrid[..]));
                labels.push(pairs.labels[2 * i]);
            }
            Batch { pixels, labels }
        }
    }
}
