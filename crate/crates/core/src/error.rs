use thiserror::Error;

use crate::checkpoint::CheckpointError;
use crate::config::ConfigError;
use crate::experience::ExperienceError;
use crate::intake::IntakeError;
use crate::session::SessionError;
use crate::signal::SignalError;
use crate::stage::StageError;
use crate::stimulus::StimulusError;
use crate::stream::StreamError;

/// Any failure surfaced by the library.
#[derive(Debug, Error)]
pub enum Error {
    #[error(transparent)]
    Signal(#[from] SignalError),
    #[error(transparent)]
    Stream(#[from] StreamError),
    #[error(transparent)]
    Stage(#[from] StageError),
    #[error(transparent)]
    Experience(#[from] ExperienceError),
    #[error(transparent)]
    Stimulus(#[from] StimulusError),
    #[error(transparent)]
    Intake(#[from] IntakeError),
    #[error(transparent)]
    Session(#[from] SessionError),
    #[error(transparent)]
    Checkpoint(#[from] CheckpointError),
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
