//! `somno`: a closed-loop sleep-induction engine.
//!
//! The pipeline ingests 64-channel EEG (replayed from a file, synthesized from
//! a stage script, or received over a framed TCP stream), reduces it to a
//! 100 Hz Pz-Oz derivation, stages every 30-second epoch as W/N/R, stops the
//! auditory stimulus once NREM sleep is detected and, after 20 epochs,
//! predicts whether the user experienced falling asleep.
//!
//! Modules map one-to-one onto pipeline stages:
//!
//! * [`signal`]: decimation, re-referencing, Pz-Oz derivation, epoching
//! * [`stream`]: replay files, the synthetic generator and the wire protocol
//! * [`stage`]: band-power features, the staging network and its optimizer
//! * [`experience`]: the 20-stage experience classifier, metrics and LOSO
//! * [`stimulus`]: the five auditory stimuli and WAV output
//! * [`intake`]: PSQI / BRUMS / PVT scoring and stimulus selection
//! * [`session`]: the stop-on-NREM controller
//! * [`synthetic`]: labeled corpora from the stage-scripted generator
//! * [`config`] and [`cli`]: operator surface

pub mod checkpoint;
pub mod cli;
pub mod config;
pub mod experience;
pub mod intake;
pub mod session;
pub mod signal;
pub mod stage;
pub mod stimulus;
pub mod stream;
pub mod synthetic;

mod error;

pub use error::{Error, Result};
