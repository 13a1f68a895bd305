//! Twenty-stage sequence → "did I fall asleep?" classification, with the
//! metrics and leave-one-subject-out harness used to evaluate it.

mod corpus;
mod loso;
mod metrics;
mod report;

pub use corpus::{synthetic_corpus, CorpusParams, SLEPT_MIN_N};
pub use loso::{loso_evaluate, loso_folds, Fold, SubjectDataset};
pub use metrics::{accuracy, f1_from_counts, macro_f1, per_class_f1};
pub use report::{EvalReport, SubjectScore};

use std::fmt;
use std::path::Path;
use std::str::FromStr;

use log::warn;
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::checkpoint::{Checkpoint, CheckpointError};
use crate::stage::{cross_entropy, softmax, AdamConfig, AdamState, EpochStats, StageError, StageLabel, TrainHistory};

/// Stages per session: 10 minutes of 30-second epochs.
pub const SEQUENCE_LEN: usize = 20;
pub const ENCODED_LEN: usize = 3 * SEQUENCE_LEN;
const N_PARAMS: usize = 2 * ENCODED_LEN + 2;

#[derive(Debug, Error)]
pub enum ExperienceError {
    #[error("stage sequence must have {SEQUENCE_LEN} labels, got {0}")]
    SequenceLength(usize),
    #[error("bad stage sequence {0:?}")]
    BadSequence(String),
    #[error("prediction/label length mismatch: {preds} vs {labels}")]
    LengthMismatch { preds: usize, labels: usize },
    #[error("metric input is empty")]
    EmptyInput,
    #[error("training set is empty")]
    EmptyTrainingSet,
    #[error("subject {0:?} has no samples")]
    EmptySubject(String),
    #[error("duplicate subject id {0:?}")]
    DuplicateSubject(String),
    #[error("leave-one-subject-out needs at least 2 subjects, got {0}")]
    TooFewSubjects(usize),
    #[error("fold for subject {0:?} leaks test data into training")]
    Leak(String),
    #[error("bad score table: {0}")]
    BadTable(String),
    #[error(transparent)]
    Stage(#[from] StageError),
    #[error(transparent)]
    Checkpoint(#[from] CheckpointError),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, ExperienceError>;

/// Self-reported outcome of a session. Declaration order is the tie-break
/// order, so an exact tie resolves to `NotSlept`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum SleepExperience {
    NotSlept,
    Slept,
}

impl SleepExperience {
    pub const ALL: [SleepExperience; 2] = [SleepExperience::NotSlept, SleepExperience::Slept];

    pub fn index(self) -> usize {
        self as usize
    }
}

impl fmt::Display for SleepExperience {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            SleepExperience::NotSlept => "not-slept",
            SleepExperience::Slept => "slept",
        })
    }
}

impl FromStr for SleepExperience {
    type Err = ExperienceError;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "slept" | "s" | "1" | "yes" => Ok(SleepExperience::Slept),
            "not-slept" | "notslept" | "n" | "0" | "no" => Ok(SleepExperience::NotSlept),
            _ => Err(ExperienceError::BadSequence(s.to_string())),
        }
    }
}

/// Exactly 20 stage labels in epoch order.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct StageSequence([StageLabel; SEQUENCE_LEN]);

impl StageSequence {
    pub fn new(labels: &[StageLabel]) -> Result<Self> {
        let arr: [StageLabel; SEQUENCE_LEN] = labels
            .try_into()
            .map_err(|_| ExperienceError::SequenceLength(labels.len()))?;
        Ok(Self(arr))
    }

    pub fn uniform(label: StageLabel) -> Self {
        Self([label; SEQUENCE_LEN])
    }

    pub fn labels(&self) -> &[StageLabel; SEQUENCE_LEN] {
        &self.0
    }

    pub fn count(&self, label: StageLabel) -> usize {
        self.0.iter().filter(|&&l| l == label).count()
    }
}

impl fmt::Display for StageSequence {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        self.0.iter().try_for_each(|l| write!(f, "{l}"))
    }
}

impl FromStr for StageSequence {
    type Err = ExperienceError;

    /// `"WWNN…"` (20 letters, separators ignored).
    fn from_str(s: &str) -> Result<Self> {
        let labels = s
            .chars()
            .filter(|c| !c.is_whitespace() && *c != ',')
            .map(|c| {
                c.to_string()
                    .parse::<StageLabel>()
                    .map_err(|_| ExperienceError::BadSequence(s.to_string()))
            })
            .collect::<Result<Vec<_>>>()?;
        Self::new(&labels)
    }
}

/// One-hot encoding: position `3i + j` is 1 iff stage `i` has label index `j`.
pub fn encode_sequence(seq: &StageSequence) -> [f64; ENCODED_LEN] {
    let mut out = [0.0; ENCODED_LEN];
    for (i, l) in seq.0.iter().enumerate() {
        out[3 * i + l.index()] = 1.0;
    }
    out
}

/// Single fully-connected layer `60 → 2` with a softmax head. Parameters are
/// `[W (2×60, row-major) | b (2)]`, rows ordered as [`SleepExperience::ALL`].
#[derive(Debug, Clone, PartialEq)]
pub struct ExperienceNet {
    params: Vec<f64>,
}

impl Default for ExperienceNet {
    fn default() -> Self {
        Self::zeros()
    }
}

impl ExperienceNet {
    pub fn zeros() -> Self {
        Self {
            params: vec![0.0; N_PARAMS],
        }
    }

    /// Glorot-uniform weights, zero bias.
    pub fn init(seed: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let a = (6.0 / (ENCODED_LEN + 2) as f64).sqrt();
        let mut net = Self::zeros();
        net.params[..2 * ENCODED_LEN]
            .iter_mut()
            .for_each(|w| *w = rng.random_range(-a..a));
        net
    }

    pub fn from_params(params: Vec<f64>) -> Result<Self> {
        if params.len() != N_PARAMS {
            return Err(StageError::ShapeMismatch {
                expected: N_PARAMS,
                got: params.len(),
            }
            .into());
        }
        Ok(Self { params })
    }

    pub fn params(&self) -> &[f64] {
        &self.params
    }

    pub fn params_mut(&mut self) -> &mut [f64] {
        &mut self.params
    }

    pub fn logits(&self, seq: &StageSequence) -> [f64; 2] {
        let x = encode_sequence(seq);
        let (w, b) = self.params.split_at(2 * ENCODED_LEN);
        let mut z = [b[0], b[1]];
        for (k, row) in w.chunks_exact(ENCODED_LEN).enumerate() {
            z[k] += row.iter().zip(&x).map(|(w, x)| w * x).sum::<f64>();
        }
        z
    }

    /// Probabilities ordered as [`SleepExperience::ALL`].
    pub fn forward(&self, seq: &StageSequence) -> [f64; 2] {
        softmax(&self.logits(seq))
    }

    /// Predicted class and its probability; ties go to `NotSlept`.
    pub fn predict(&self, seq: &StageSequence) -> (SleepExperience, f64) {
        let p = self.forward(seq);
        if p[1] > p[0] {
            (SleepExperience::Slept, p[1])
        } else {
            (SleepExperience::NotSlept, p[0])
        }
    }

    pub fn loss(&self, batch: &[(StageSequence, SleepExperience)]) -> f64 {
        batch
            .iter()
            .map(|(s, y)| cross_entropy(&self.forward(s), y.index()))
            .sum::<f64>()
            / batch.len() as f64
    }

    /// Exact gradient of the mean batch cross-entropy.
    pub fn gradient(&self, batch: &[(StageSequence, SleepExperience)]) -> Result<Vec<f64>> {
        if batch.is_empty() {
            return Err(ExperienceError::EmptyTrainingSet);
        }
        let inv = 1.0 / batch.len() as f64;
        let mut grad = vec![0.0; N_PARAMS];
        for (s, y) in batch {
            let x = encode_sequence(s);
            let mut d = self.forward(s);
            d[y.index()] -= 1.0;
            for k in 0..2 {
                let dk = d[k] * inv;
                let row = &mut grad[k * ENCODED_LEN..(k + 1) * ENCODED_LEN];
                for (g, xi) in row.iter_mut().zip(&x) {
                    *g += dk * xi;
                }
                grad[2 * ENCODED_LEN + k] += dk;
            }
        }
        Ok(grad)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ExperienceTrainConfig {
    pub epochs: usize,
    pub batch_size: usize,
    pub seed: u64,
    pub adam: AdamConfig,
}

impl Default for ExperienceTrainConfig {
    fn default() -> Self {
        Self {
            epochs: 200,
            batch_size: 16,
            seed: 0,
            adam: AdamConfig::default(),
        }
    }
}

impl ExperienceTrainConfig {
    /// A learning rate that converges on ~90 training sequences.
    pub fn synthetic(seed: u64) -> Self {
        Self {
            seed,
            adam: AdamConfig {
                lr: 2e-2,
                ..AdamConfig::default()
            },
            ..Self::default()
        }
    }
}

fn experience_stats(net: &ExperienceNet, data: &[(StageSequence, SleepExperience)]) -> EpochStats {
    let correct = data.iter().filter(|(s, y)| net.predict(s).0 == *y).count();
    EpochStats {
        loss: net.loss(data),
        accuracy: correct as f64 / data.len() as f64,
    }
}

/// Pool every subject's samples and train with cross-entropy and Adam.
pub fn train_experience(
    subjects: &[SubjectDataset],
    config: &ExperienceTrainConfig,
) -> Result<(ExperienceNet, TrainHistory)> {
    let data: Vec<_> = subjects.iter().flat_map(|s| s.samples.iter().copied()).collect();
    train_experience_samples(&data, config)
}

pub fn train_experience_samples(
    data: &[(StageSequence, SleepExperience)],
    config: &ExperienceTrainConfig,
) -> Result<(ExperienceNet, TrainHistory)> {
    if data.is_empty() {
        return Err(ExperienceError::EmptyTrainingSet);
    }
    if config.batch_size == 0 {
        return Err(StageError::ZeroBatch.into());
    }
    if !SleepExperience::ALL
        .iter()
        .all(|c| data.iter().any(|(_, y)| y == c))
    {
        warn!("experience training set contains a single class");
    }
    let mut net = ExperienceNet::init(config.seed);
    let mut adam = AdamState::new(N_PARAMS, config.adam);
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed ^ 0x4558_5045_5249_454e);
    let mut order: Vec<usize> = (0..data.len()).collect();
    let mut history = TrainHistory {
        initial: Some(experience_stats(&net, data)),
        epochs: Vec::with_capacity(config.epochs),
    };
    let mut batch = Vec::with_capacity(config.batch_size);
    for _ in 0..config.epochs {
        order.shuffle(&mut rng);
        for idx in order.chunks(config.batch_size) {
            batch.clear();
            batch.extend(idx.iter().map(|&i| data[i]));
            let grad = net.gradient(&batch)?;
            adam.step(&mut net.params, &grad)?;
        }
        history.epochs.push(experience_stats(&net, data));
    }
    Ok((net, history))
}

pub const EXPERIENCE_KIND: &str = "experience-fc";

pub fn experience_checkpoint(net: &ExperienceNet, config: &ExperienceTrainConfig) -> Checkpoint {
    let mut ck = Checkpoint::new(EXPERIENCE_KIND)
        .field("architecture", format!("{ENCODED_LEN}-2 softmax"))
        .field("seed", config.seed)
        .field("epochs", config.epochs)
        .field("batch_size", config.batch_size)
        .field("lr", config.adam.lr)
        .field("weight_decay", config.adam.weight_decay)
        .field("beta1", config.adam.beta1)
        .field("beta2", config.adam.beta2)
        .field("eps", config.adam.eps);
    ck.values = net.params.clone();
    ck
}

pub fn experience_from_checkpoint(ck: &Checkpoint) -> Result<ExperienceNet> {
    ck.expect_kind(EXPERIENCE_KIND)?;
    if ck.values.len() != N_PARAMS {
        return Err(CheckpointError::Shape {
            expected: N_PARAMS,
            got: ck.values.len(),
        }
        .into());
    }
    ExperienceNet::from_params(ck.values.clone())
}

pub fn save_experience(net: &ExperienceNet, config: &ExperienceTrainConfig, path: impl AsRef<Path>) -> Result<()> {
    Ok(experience_checkpoint(net, config).save(path)?)
}

pub fn load_experience(path: impl AsRef<Path>) -> Result<ExperienceNet> {
    experience_from_checkpoint(&Checkpoint::load(path)?)
}
