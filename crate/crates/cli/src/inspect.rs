//! Dumps positive and negative samples as PGM images for eyeballing
//! the negative data generators.

use std::io::Write;
use std::path::Path;
use std::sync::Arc;

use ff_core::data::{mix_seed, BatchStream, Split, IMAGE_SIDE};
use ff_core::negdata::{negative_batch, positive_batch};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::run::load_split;
use crate::{dataset_root, resolve_settings, CliError, InspectArgs};

/// Writes one 28x28 image as binary 8-bit PGM.
pub fn write_pgm(path: &Path, pixels: &[f32]) -> Result<(), CliError> {
    if pixels.len() != IMAGE_SIDE * IMAGE_SIDE {
        return Err(CliError::Env(format!(
            "pgm write: expected {} pixels, got {}",
            IMAGE_SIDE * IMAGE_SIDE,
            pixels.len()
        )));
    }
    let mut file = std::io::BufWriter::new(std::fs::File::create(path)?);
    write!(file, "P5\n{IMAGE_SIDE} {IMAGE_SIDE}\n255\n")?;
    let bytes: Vec<u8> = pixels
        .iter()
        .map(|p| (p.clamp(0.0, 1.0) * 255.0).round() as u8)
        .collect();
    file.write_all(&bytes)?;
    Ok(())
}

pub fn cmd_inspect(args: &InspectArgs) -> Result<(), CliError> {
    if args.count == 0 {
        return Ok(());
    }
    let settings = resolve_settings(&args.overrides)?;
    let root = dataset_root(args.overrides.dataset_dir.as_ref());
    let train = Arc::new(load_split(&root, settings.dataset, Split::Train)?);

    std::fs::create_dir_all(&args.out)?;
    let strategy = settings.strategy();
    let mut pos_stream =
        BatchStream::new(Arc::clone(&train), args.count, mix_seed(settings.seed, 1))?;
    let mut neg_stream =
        BatchStream::new(Arc::clone(&train), args.count, mix_seed(settings.seed, 2))?;
    let mut rng = ChaCha8Rng::seed_from_u64(mix_seed(settings.seed, 3));

    let pos = positive_batch(&mut pos_stream, strategy.overlays_positives());
    let neg = negative_batch(strategy, &mut neg_stream, &mut rng);
    for i in 0..args.count {
        let pos_path = args.out.join(format!("pos-{i:03}.pgm"));
        write_pgm(&pos_path, pos.pixels.row(i).as_slice().expect("row"))?;
        let neg_path = args.out.join(format!("neg-{i:03}.pgm"));
        write_pgm(&neg_path, neg.pixels.row(i).as_slice().expect("row"))?;
    }
    println!(
        "wrote {} positive and {} negative {} samples to {}",
        args.count,
        args.count,
        strategy.kind_name(),
        args.out.display()
    );
    Ok(())
}
