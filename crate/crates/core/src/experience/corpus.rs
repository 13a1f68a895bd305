//! Rule-labeled synthetic subjects for desk-scale experiments.
//!
//! Each subject has a preferred sleep-onset epoch; each of their sessions
//! jitters it. Before onset the stages are mostly W, afterwards mostly N,
//! with occasional R or brief arousals. The label is `Slept` iff at least
//! [`SLEPT_MIN_N`] of the 20 stages are N, so a linear layer can learn it.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use super::{SleepExperience, StageSequence, SubjectDataset, SEQUENCE_LEN};
use crate::stage::StageLabel;

pub const SLEPT_MIN_N: usize = 6;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CorpusParams {
    pub subjects: usize,
    pub per_subject: usize,
    /// Spread of a session's onset around the subject's preferred onset, in
    /// epochs.
    pub onset_jitter: f64,
    pub seed: u64,
}

impl Default for CorpusParams {
    fn default() -> Self {
        Self {
            subjects: 19,
            per_subject: 5,
            onset_jitter: 3.0,
            seed: 0,
        }
    }
}

fn pick(rng: &mut ChaCha8Rng, weights: [(StageLabel, f64); 3]) -> StageLabel {
    let mut u: f64 = rng.random();
    for (l, w) in weights {
        if u < w {
            return l;
        }
        u -= w;
    }
    weights[2].0
}

pub fn synthetic_corpus(params: &CorpusParams) -> Vec<SubjectDataset> {
    use StageLabel::*;
    let mut rng = ChaCha8Rng::seed_from_u64(params.seed);
    let jitter = Normal::new(0.0, params.onset_jitter.max(1e-9)).unwrap();
    (0..params.subjects)
        .map(|s| {
            let preferred: f64 = rng.random_range(2.0..20.0);
            let samples = (0..params.per_subject)
                .map(|_| {
                    let onset = (preferred + jitter.sample(&mut rng)).round().clamp(0.0, 20.0) as usize;
                    let mut labels = [W; SEQUENCE_LEN];
                    for (i, l) in labels.iter_mut().enumerate() {
                        *l = if i < onset {
                            pick(&mut rng, [(W, 0.85), (N, 0.1), (R, 0.05)])
                        } else {
                            pick(&mut rng, [(N, 0.85), (R, 0.1), (W, 0.05)])
                        };
                    }
                    let seq = StageSequence(labels);
                    let y = if seq.count(N) >= SLEPT_MIN_N {
                        SleepExperience::Slept
                    } else {
                        SleepExperience::NotSlept
                    };
                    (seq, y)
                })
                .collect();
            SubjectDataset {
                id: format!("S{:02}", s + 1),
                samples,
            }
        })
        .collect()
}
