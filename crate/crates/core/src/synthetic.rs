//! Labeled corpora built from the stage-scripted generator.

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::signal::{epoch_split, preprocess, Epoch, EPOCH_SECONDS};
use crate::stage::StageLabel;
use crate::stream::{chunks_to_record, synth_eeg, StageScript};
use crate::Result;

/// The electrodes the staging front end needs. Generating only these keeps
/// corpus construction cheap; the Pz-Oz derivation is identical to the one
/// taken from a full montage with the same seed layout.
pub const STAGING_MONTAGE: [&str; 3] = ["Pz", "Oz", "FCz"];

/// Generated in blocks of this many epochs to bound memory.
const BLOCK_EPOCHS: usize = 20;

/// Render `script` over `montage` and return its preprocessed epochs.
pub fn script_epochs(script: &StageScript, montage: &[String]) -> Result<Vec<Epoch>> {
    let stream = synth_eeg(script, montage)?;
    let header = stream.header();
    let chunks = stream.collect::<std::result::Result<Vec<_>, _>>()?;
    let record = chunks_to_record(&header, &chunks)?;
    Ok(epoch_split(&preprocess(&record)?)?)
}

/// `n_per_class` epochs of each stage in a seeded random order, each paired
/// with the stage that generated it.
pub fn staging_set(n_per_class: usize, seed: u64) -> Result<Vec<(Epoch, StageLabel)>> {
    let mut labels: Vec<StageLabel> = StageLabel::ALL
        .iter()
        .flat_map(|&l| std::iter::repeat_n(l, n_per_class))
        .collect();
    labels.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    let montage: Vec<String> = STAGING_MONTAGE.iter().map(|s| s.to_string()).collect();
    let mut out = Vec::with_capacity(labels.len());
    for (b, block) in labels.chunks(BLOCK_EPOCHS).enumerate() {
        let segments = block.iter().map(|&l| (l, f64::from(EPOCH_SECONDS))).collect();
        let script = StageScript::new(segments, seed.wrapping_mul(1_000_003).wrapping_add(b as u64))?;
        let epochs = script_epochs(&script, &montage)?;
        debug_assert_eq!(epochs.len(), block.len());
        for (e, &l) in epochs.into_iter().zip(block) {
            let index = out.len();
            out.push((e.with_index(index), l));
        }
    }
    Ok(out)
}
