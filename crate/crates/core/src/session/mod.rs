//! The closed-loop controller: select a stimulus, stage every 30-second
//! epoch, stop the stimulus once NREM persists, and after 20 epochs predict
//! the sleep experience.
//!
//! The controller is a plain state machine driven by [`SessionController::on_chunk`]
//! (raw 1000 Hz chunks) or [`SessionController::on_epoch`] (preprocessed
//! epochs). Audio is never rendered here; start/stop commands go out over a
//! non-blocking channel to whoever owns the audio device.

mod log;
mod report;

pub use self::log::{LogEvent, SessionLog};
pub use self::report::SessionReport;

use std::fmt;
use std::sync::mpsc::Sender;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::checkpoint::CheckpointError;
use crate::experience::{ExperienceError, ExperienceNet, SleepExperience, StageSequence, SEQUENCE_LEN};
use crate::intake::{IntakeProfile, Policy};
use crate::signal::{preprocess, Epoch, MultiChannelRecord, SignalError, EPOCH_SAMPLES, EPOCH_SECONDS, STAGING_RATE_HZ};
use crate::stage::{StageClassifier, StageError, StageLabel};
use crate::stimulus::{db_to_amplitude, StimulusKind};
use crate::stream::{EegChunk, SeqChecker, StreamError, StreamHeader};

const EPOCH_MS: u64 = EPOCH_SECONDS as u64 * 1000;

#[derive(Debug, Error)]
pub enum SessionError {
    #[error("operation needs phase {expected}, session is {actual}")]
    WrongPhase { expected: &'static str, actual: Phase },
    #[error("session already has {SEQUENCE_LEN} epochs")]
    AfterFinalized,
    #[error("invalid session config: {0}")]
    BadConfig(String),
    #[error("no stream header attached; call attach_stream first")]
    NoStream,
    #[error("epoch must be {EPOCH_SAMPLES} samples at {STAGING_RATE_HZ} Hz")]
    BadEpoch,
    #[error(transparent)]
    Stream(#[from] StreamError),
    #[error(transparent)]
    Signal(#[from] SignalError),
    #[error(transparent)]
    Stage(#[from] StageError),
    #[error(transparent)]
    Experience(#[from] ExperienceError),
    #[error(transparent)]
    Checkpoint(#[from] CheckpointError),
}

pub type Result<T> = std::result::Result<T, SessionError>;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Phase {
    Intake,
    Stimulating,
    Quiet,
    Finalized,
}

impl fmt::Display for Phase {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fmt::Debug::fmt(self, f)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SessionConfig {
    /// Consecutive N epochs that stop the stimulus.
    pub stop_k: usize,
    /// Resume after this many consecutive W epochs once stopped. Off by
    /// default: a session has a single stop event.
    pub rearm_after_wake: Option<usize>,
    pub gain_dbfs: f64,
}

impl Default for SessionConfig {
    fn default() -> Self {
        Self {
            stop_k: 2,
            rearm_after_wake: None,
            gain_dbfs: -40.0,
        }
    }
}

impl SessionConfig {
    pub fn validate(&self) -> Result<()> {
        if self.stop_k == 0 {
            return Err(SessionError::BadConfig("stop_k must be at least 1".into()));
        }
        if self.rearm_after_wake == Some(0) {
            return Err(SessionError::BadConfig("rearm_after_wake must be at least 1".into()));
        }
        if !self.gain_dbfs.is_finite() || self.gain_dbfs > 0.0 {
            return Err(SessionError::BadConfig(format!("gain {} dBFS", self.gain_dbfs)));
        }
        Ok(())
    }
}

/// Commands for the audio side.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum StimulusCommand {
    Start { kind: StimulusKind, amplitude: f64 },
    Stop,
}

/// What the controller decided on a step.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Action {
    StartStimulus { kind: StimulusKind, amplitude: f64 },
    StopStimulus { epoch: usize },
    ExperiencePredicted { experience: SleepExperience, probability: f64 },
}

/// Trained models a session runs with.
pub struct SessionModels {
    pub stage: Box<dyn StageClassifier>,
    pub experience: ExperienceNet,
}

pub struct SessionController {
    config: SessionConfig,
    models: SessionModels,
    policy_name: String,
    phase: Phase,
    stimulus: Option<StimulusKind>,
    stages: Vec<StageLabel>,
    stop_epoch: Option<usize>,
    rearm_epochs: Vec<usize>,
    experience: Option<(SleepExperience, f64)>,
    log: SessionLog,
    commands: Option<Sender<StimulusCommand>>,
    stream: Option<StreamHeader>,
    seq: SeqChecker,
    pending: Vec<Vec<f64>>,
    chunks_seen: u64,
}

impl fmt::Debug for SessionController {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("SessionController")
            .field("phase", &self.phase)
            .field("stimulus", &self.stimulus)
            .field("stages", &self.stages)
            .field("stop_epoch", &self.stop_epoch)
            .finish_non_exhaustive()
    }
}

impl SessionController {
    /// A controller in the `Intake` phase.
    pub fn new(models: SessionModels, config: SessionConfig) -> Result<Self> {
        config.validate()?;
        Ok(Self {
            config,
            models,
            policy_name: String::new(),
            phase: Phase::Intake,
            stimulus: None,
            stages: Vec::with_capacity(SEQUENCE_LEN),
            stop_epoch: None,
            rearm_epochs: Vec::new(),
            experience: None,
            log: SessionLog::default(),
            commands: None,
            stream: None,
            seq: SeqChecker::new(),
            pending: Vec::new(),
            chunks_seen: 0,
        })
    }

    /// Route stimulus commands to an audio consumer.
    pub fn with_commands(mut self, tx: Sender<StimulusCommand>) -> Self {
        self.commands = Some(tx);
        self
    }

    pub fn phase(&self) -> Phase {
        self.phase
    }

    pub fn stimulus(&self) -> Option<StimulusKind> {
        self.stimulus
    }

    pub fn stages(&self) -> &[StageLabel] {
        &self.stages
    }

    pub fn stop_epoch(&self) -> Option<usize> {
        self.stop_epoch
    }

    pub fn log(&self) -> &SessionLog {
        &self.log
    }

    pub fn config(&self) -> &SessionConfig {
        &self.config
    }

    fn send(&self, cmd: StimulusCommand) {
        if let Some(tx) = &self.commands {
            if tx.send(cmd).is_err() {
                ::log::warn!("stimulus consumer has gone away; dropping {cmd:?}");
            }
        }
    }

    fn start_action(&mut self, at_ms: u64) -> Action {
        let kind = self.stimulus.expect("stimulus selected before start");
        let amplitude = if kind == StimulusKind::Sham {
            0.0
        } else {
            db_to_amplitude(self.config.gain_dbfs)
        };
        self.send(StimulusCommand::Start { kind, amplitude });
        self.log.push(
            at_ms,
            LogEvent::StimulusStarted,
            format!("kind={kind} gain_dbfs={} amplitude={amplitude}", self.config.gain_dbfs),
        );
        Action::StartStimulus { kind, amplitude }
    }

    /// Select the stimulus from the intake profile and begin stimulating.
    pub fn start(&mut self, profile: &IntakeProfile, policy: &Policy) -> Result<Vec<Action>> {
        if self.phase != Phase::Intake {
            return Err(SessionError::WrongPhase {
                expected: "Intake",
                actual: self.phase,
            });
        }
        self.stimulus = Some(policy.select(profile));
        self.policy_name = policy.name.clone();
        self.phase = Phase::Stimulating;
        Ok(vec![self.start_action(0)])
    }

    /// Attach the header of the raw stream fed to [`Self::on_chunk`].
    pub fn attach_stream(&mut self, header: StreamHeader) {
        self.pending = vec![Vec::new(); header.channels.len()];
        self.stream = Some(header);
    }

    /// Buffer one raw chunk; each completed 30-second window is preprocessed
    /// and staged. Sequence gaps abort with an error.
    pub fn on_chunk(&mut self, chunk: &EegChunk) -> Result<Vec<Action>> {
        if self.phase == Phase::Finalized {
            return Err(SessionError::AfterFinalized);
        }
        let header = self.stream.as_ref().ok_or(SessionError::NoStream)?;
        self.seq.check(chunk)?;
        chunk.validate()?;
        if usize::from(chunk.n_channels) != header.channels.len() {
            return Err(StreamError::InvalidChunk(format!(
                "chunk {} has {} channels, stream has {}",
                chunk.seq,
                chunk.n_channels,
                header.channels.len()
            ))
            .into());
        }
        self.chunks_seen += 1;
        for (c, buf) in self.pending.iter_mut().enumerate() {
            buf.extend(chunk.channel(c).iter().map(|&x| f64::from(x)));
        }
        let window = header.rate_hz as usize * EPOCH_SECONDS as usize;
        let mut actions = Vec::new();
        while self.pending[0].len() >= window && self.phase != Phase::Finalized {
            let header = self.stream.as_ref().expect("checked above");
            let samples: Vec<Vec<f64>> = self.pending.iter_mut().map(|b| b.drain(..window).collect()).collect();
            let record = MultiChannelRecord::new(header.channels.clone(), samples, header.rate_hz, header.reference.clone())?;
            let signal = preprocess(&record)?;
            let epoch = Epoch::new(self.stages.len(), signal.into_samples(), STAGING_RATE_HZ)?;
            actions.extend(self.on_epoch(&epoch)?);
        }
        Ok(actions)
    }

    /// Stage one preprocessed epoch and apply the stop rule.
    pub fn on_epoch(&mut self, epoch: &Epoch) -> Result<Vec<Action>> {
        match self.phase {
            Phase::Stimulating | Phase::Quiet => {}
            Phase::Finalized => return Err(SessionError::AfterFinalized),
            Phase::Intake => {
                return Err(SessionError::WrongPhase {
                    expected: "Stimulating or Quiet",
                    actual: self.phase,
                })
            }
        }
        if epoch.rate_hz() != STAGING_RATE_HZ || epoch.samples().len() != EPOCH_SAMPLES {
            return Err(SessionError::BadEpoch);
        }
        let stage = self.models.stage.classify(epoch);
        self.push_stage(stage)
    }

    /// Apply an already-classified stage (scripted replays and tests).
    pub fn push_stage(&mut self, stage: StageLabel) -> Result<Vec<Action>> {
        if self.phase == Phase::Finalized {
            return Err(SessionError::AfterFinalized);
        }
        if self.phase == Phase::Intake {
            return Err(SessionError::WrongPhase {
                expected: "Stimulating or Quiet",
                actual: self.phase,
            });
        }
        let idx = self.stages.len();
        let at_ms = (idx as u64 + 1) * EPOCH_MS;
        self.stages.push(stage);
        self.log.push(at_ms, LogEvent::StageClassified, format!("epoch={idx} stage={stage}"));
        let mut actions = Vec::new();

        let tail_all = |k: usize, l: StageLabel, s: &[StageLabel]| s.len() >= k && s[s.len() - k..].iter().all(|&x| x == l);
        match self.phase {
            Phase::Stimulating if tail_all(self.config.stop_k, StageLabel::N, &self.stages) => {
                self.phase = Phase::Quiet;
                if self.stop_epoch.is_none() {
                    self.stop_epoch = Some(idx);
                }
                self.send(StimulusCommand::Stop);
                self.log.push(at_ms, LogEvent::StimulusStopped, format!("epoch={idx}"));
                actions.push(Action::StopStimulus { epoch: idx });
            }
            Phase::Quiet => {
                if let Some(k) = self.config.rearm_after_wake {
                    if tail_all(k, StageLabel::W, &self.stages) && idx + 1 < SEQUENCE_LEN {
                        self.phase = Phase::Stimulating;
                        self.rearm_epochs.push(idx);
                        actions.push(self.start_action(at_ms));
                    }
                }
            }
            _ => {}
        }

        if self.stages.len() == SEQUENCE_LEN {
            let seq = StageSequence::new(&self.stages)?;
            let (experience, probability) = self.models.experience.predict(&seq);
            self.experience = Some((experience, probability));
            self.phase = Phase::Finalized;
            self.log.push(
                at_ms,
                LogEvent::ExperiencePredicted,
                format!("experience={experience} p={probability:.6}"),
            );
            actions.push(Action::ExperiencePredicted {
                experience,
                probability,
            });
        }
        Ok(actions)
    }

    /// Feed chunks until the session finalizes or the source ends.
    pub fn drive<I>(&mut self, chunks: I) -> Result<Vec<Action>>
    where
        I: IntoIterator<Item = std::result::Result<EegChunk, StreamError>>,
    {
        let mut actions = Vec::new();
        for chunk in chunks {
            actions.extend(self.on_chunk(&chunk?)?);
            if self.phase == Phase::Finalized {
                break;
            }
        }
        Ok(actions)
    }

    pub fn finalize(&self) -> Result<SessionReport> {
        if self.phase != Phase::Finalized {
            return Err(SessionError::WrongPhase {
                expected: "Finalized",
                actual: self.phase,
            });
        }
        let (experience, probability) = self.experience.expect("set when finalized");
        Ok(SessionReport {
            stimulus: self.stimulus.expect("set at start"),
            policy: self.policy_name.clone(),
            stages: self.stages.iter().map(|s| s.as_char()).collect(),
            stop_epoch: self.stop_epoch,
            rearm_epochs: self.rearm_epochs.clone(),
            experience,
            probability,
            stop_k: self.config.stop_k,
            gain_dbfs: self.config.gain_dbfs,
            epochs: self.stages.len(),
            preprocessed_samples: self.stages.len() * EPOCH_SAMPLES,
            raw_chunks: self.chunks_seen,
            duration_ms: self.stages.len() as u64 * EPOCH_MS,
        })
    }
}

/// Build a controller and start it in one step.
pub fn start_session(
    profile: &IntakeProfile,
    policy: &Policy,
    models: SessionModels,
    config: SessionConfig,
) -> Result<(SessionController, Vec<Action>)> {
    let mut c = SessionController::new(models, config)?;
    let actions = c.start(profile, policy)?;
    Ok((c, actions))
}
