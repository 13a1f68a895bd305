//! C ABI over the `somno` engine.
//!
//! Every function returns a [`SomnoStatus`]; on failure a message is kept per
//! thread and can be read with [`somno_last_error`]. Models and sessions are
//! opaque handles that the caller frees with the matching `_free` function.
//! Output buffers follow one convention: the caller passes a capacity, the
//! library writes the required length to `*out_len`, and returns
//! `SOMNO_STATUS_BUFFER_TOO_SMALL` without writing data if it does not fit.
//!
//! Stage codes are 0 = W, 1 = N, 2 = R. Experience codes are 0 = not slept,
//! 1 = slept. Stimulus codes are 0 = sham, 1 = repetitive beep,
//! 2 = binaural beat, 3 = white noise, 4 = rain.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::fmt::Display;
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;

use somno::checkpoint::load_stage;
use somno::experience::{accuracy, load_experience, macro_f1, ExperienceNet, SleepExperience, StageSequence};
use somno::intake::{Answers, IntakeProfile, Policy};
use somno::session::{Phase, SessionConfig, SessionController, SessionModels};
use somno::signal::{Decimator, Epoch, EPOCH_SAMPLES, STAGING_RATE_HZ};
use somno::stage::{band_powers, StageLabel, StageNet, N_FEATURES};
use somno::stimulus::{synth, write_wav, StimulusKind};
use somno::stream::{decode_frame, encode_chunk, EegChunk, Frame, FrameError};

/// Result of every call.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SomnoStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidArgument = 2,
    BufferTooSmall = 3,
    Io = 4,
    Format = 5,
    WrongPhase = 6,
    Incomplete = 7,
    Panic = 8,
}

/// Session phase as reported by [`somno_session_phase`].
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SomnoPhase {
    Intake = 0,
    Stimulating = 1,
    Quiet = 2,
    Finalized = 3,
}

/// A trained epoch stager.
pub struct SomnoStageNet(StageNet);

/// A trained sleep-experience classifier.
pub struct SomnoExperienceNet(ExperienceNet);

/// One closed-loop session.
pub struct SomnoSession(SessionController);

thread_local! {
    static LAST_ERROR: RefCell<CString> = RefCell::new(CString::default());
}

#[derive(Debug)]
struct Fail(SomnoStatus, String);

impl Fail {
    fn new(status: SomnoStatus, msg: impl Display) -> Self {
        Fail(status, msg.to_string())
    }
}

type FfiResult = Result<(), Fail>;

fn set_error(msg: &str) {
    let c = CString::new(msg.replace('\0', " ")).unwrap_or_default();
    LAST_ERROR.with(|e| *e.borrow_mut() = c);
}

fn guard(f: impl FnOnce() -> FfiResult) -> SomnoStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => {
            set_error("");
            SomnoStatus::Ok
        }
        Ok(Err(Fail(status, msg))) => {
            set_error(&msg);
            status
        }
        Err(_) => {
            set_error("panic inside somno");
            SomnoStatus::Panic
        }
    }
}

fn from_core(e: somno::Error) -> Fail {
    use somno::Error as E;
    let status = match &e {
        E::Io(_) => SomnoStatus::Io,
        E::Checkpoint(_) => SomnoStatus::Format,
        E::Session(somno::session::SessionError::WrongPhase { .. } | somno::session::SessionError::AfterFinalized) => {
            SomnoStatus::WrongPhase
        }
        _ => SomnoStatus::InvalidArgument,
    };
    Fail::new(status, e)
}

fn core<T, E: Into<somno::Error>>(r: Result<T, E>) -> Result<T, Fail> {
    r.map_err(|e| from_core(e.into()))
}

fn invalid(msg: impl Display) -> Fail {
    Fail::new(SomnoStatus::InvalidArgument, msg)
}

fn non_null<T>(p: *const T, name: &str) -> Result<(), Fail> {
    if p.is_null() {
        Err(Fail::new(SomnoStatus::NullPointer, format!("{name} is NULL")))
    } else {
        Ok(())
    }
}

/// # Safety
/// `p` must be NULL-checked and point to `n` readable values.
unsafe fn slice<'a, T>(p: *const T, n: usize, name: &str) -> Result<&'a [T], Fail> {
    if n == 0 {
        return Ok(&[]);
    }
    non_null(p, name)?;
    Ok(std::slice::from_raw_parts(p, n))
}

unsafe fn str_arg<'a>(p: *const c_char, name: &str) -> Result<&'a str, Fail> {
    non_null(p, name)?;
    CStr::from_ptr(p)
        .to_str()
        .map_err(|_| invalid(format!("{name} is not UTF-8")))
}

/// Copy `data` into `(out, cap)` and report its length through `out_len`.
unsafe fn emit<T: Copy>(data: &[T], out: *mut T, cap: usize, out_len: *mut usize) -> FfiResult {
    non_null(out_len, "out_len")?;
    *out_len = data.len();
    if data.len() > cap {
        return Err(Fail::new(
            SomnoStatus::BufferTooSmall,
            format!("need {} elements, have {cap}", data.len()),
        ));
    }
    if !data.is_empty() {
        non_null(out, "out")?;
        ptr::copy_nonoverlapping(data.as_ptr(), out, data.len());
    }
    Ok(())
}

fn stage_from_code(code: u8) -> Result<StageLabel, Fail> {
    StageLabel::from_index(usize::from(code)).ok_or_else(|| invalid(format!("stage code {code}")))
}

fn stimulus_from_code(code: u32) -> Result<StimulusKind, Fail> {
    StimulusKind::ALL
        .get(code as usize)
        .copied()
        .ok_or_else(|| invalid(format!("stimulus code {code}")))
}

fn experience_from_code(code: u8) -> Result<SleepExperience, Fail> {
    SleepExperience::ALL
        .get(usize::from(code))
        .copied()
        .ok_or_else(|| invalid(format!("experience code {code}")))
}

/// The message for the most recent failure on this thread, or an empty
/// string. Valid until the next `somno_` call on the same thread.
#[no_mangle]
pub extern "C" fn somno_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ptr())
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn somno_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// Anti-alias filter and downsample `n` samples taken at `rate_hz` by
/// `factor`.
///
/// # Safety
/// `x` must hold `n` doubles; `out` must have room for `out_cap` doubles.
#[no_mangle]
pub unsafe extern "C" fn somno_decimate(
    x: *const f64,
    n: usize,
    rate_hz: u32,
    factor: u32,
    out: *mut f64,
    out_cap: usize,
    out_len: *mut usize,
) -> SomnoStatus {
    guard(|| {
        let x = slice(x, n, "x")?;
        let y = core(Decimator::new(rate_hz, factor).and_then(|d| d.process(x)))?;
        emit(&y, out, out_cap, out_len)
    })
}

/// Staging features of one 30 s epoch at 100 Hz (`n` must be 3000): five
/// relative band powers (delta, theta, alpha, sigma, beta) then log total
/// power.
///
/// # Safety
/// `epoch` must hold `n` doubles; `out` must have room for 6 doubles.
#[no_mangle]
pub unsafe extern "C" fn somno_band_powers(epoch: *const f64, n: usize, out: *mut f64) -> SomnoStatus {
    guard(|| {
        let x = slice(epoch, n, "epoch")?;
        non_null(out, "out")?;
        let e = core(Epoch::new(0, x.to_vec(), STAGING_RATE_HZ))?;
        let f = band_powers(&e);
        ptr::copy_nonoverlapping(f.0.as_ptr(), out, N_FEATURES);
        Ok(())
    })
}

/// Load a stage checkpoint. Free the handle with [`somno_stage_net_free`].
///
/// # Safety
/// `path` must be a NUL-terminated string; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn somno_stage_net_load(path: *const c_char, out: *mut *mut SomnoStageNet) -> SomnoStatus {
    guard(|| {
        non_null(out, "out")?;
        *out = ptr::null_mut();
        let net = core(load_stage(str_arg(path, "path")?))?;
        *out = Box::into_raw(Box::new(SomnoStageNet(net)));
        Ok(())
    })
}

/// # Safety
/// `net` must come from [`somno_stage_net_load`] and not be freed twice.
#[no_mangle]
pub unsafe extern "C" fn somno_stage_net_free(net: *mut SomnoStageNet) {
    if !net.is_null() {
        drop(Box::from_raw(net));
    }
}

/// Stage code for one 30 s epoch at 100 Hz.
///
/// # Safety
/// `net` must be a live handle; `epoch` must hold `n` doubles.
#[no_mangle]
pub unsafe extern "C" fn somno_stage_net_classify(
    net: *const SomnoStageNet,
    epoch: *const f64,
    n: usize,
    stage: *mut u8,
) -> SomnoStatus {
    guard(|| {
        non_null(net, "net")?;
        non_null(stage, "stage")?;
        let e = core(Epoch::new(0, slice(epoch, n, "epoch")?.to_vec(), STAGING_RATE_HZ))?;
        *stage = (*net).0.predict_stage(&e).index() as u8;
        Ok(())
    })
}

/// Load an experience checkpoint. Free with [`somno_experience_net_free`].
///
/// # Safety
/// `path` must be a NUL-terminated string; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn somno_experience_net_load(
    path: *const c_char,
    out: *mut *mut SomnoExperienceNet,
) -> SomnoStatus {
    guard(|| {
        non_null(out, "out")?;
        *out = ptr::null_mut();
        let net = core(load_experience(str_arg(path, "path")?))?;
        *out = Box::into_raw(Box::new(SomnoExperienceNet(net)));
        Ok(())
    })
}

/// # Safety
/// `net` must come from [`somno_experience_net_load`] and not be freed twice.
#[no_mangle]
pub unsafe extern "C" fn somno_experience_net_free(net: *mut SomnoExperienceNet) {
    if !net.is_null() {
        drop(Box::from_raw(net));
    }
}

/// Predict the experience code and its probability from 20 stage codes.
///
/// # Safety
/// `net` must be a live handle; `stages` must hold `n` bytes.
#[no_mangle]
pub unsafe extern "C" fn somno_experience_net_predict(
    net: *const SomnoExperienceNet,
    stages: *const u8,
    n: usize,
    experience: *mut u8,
    probability: *mut f64,
) -> SomnoStatus {
    guard(|| {
        non_null(net, "net")?;
        non_null(experience, "experience")?;
        let labels = slice(stages, n, "stages")?
            .iter()
            .map(|&c| stage_from_code(c))
            .collect::<Result<Vec<_>, _>>()?;
        let seq = core(StageSequence::new(&labels))?;
        let (y, p) = (*net).0.predict(&seq);
        *experience = y.index() as u8;
        if !probability.is_null() {
            *probability = p;
        }
        Ok(())
    })
}

/// Accuracy and two-class macro F1 of `preds` against `labels` (experience
/// codes).
///
/// # Safety
/// `preds` and `labels` must each hold `n` bytes.
#[no_mangle]
pub unsafe extern "C" fn somno_metrics(
    preds: *const u8,
    labels: *const u8,
    n: usize,
    acc: *mut f64,
    f1: *mut f64,
) -> SomnoStatus {
    guard(|| {
        let decode = |p, name| -> Result<Vec<SleepExperience>, Fail> {
            slice(p, n, name)?.iter().map(|&c| experience_from_code(c)).collect()
        };
        let (p, l) = (decode(preds, "preds")?, decode(labels, "labels")?);
        non_null(acc, "acc")?;
        non_null(f1, "f1")?;
        *acc = core(accuracy(&p, &l))?;
        *f1 = core(macro_f1(&p, &l, &SleepExperience::ALL))?;
        Ok(())
    })
}

/// Encode one data frame. `samples` is channel-major,
/// `n_channels * n_samples` values; `seq` must be at least 1.
///
/// # Safety
/// `samples` must hold `n_channels * n_samples` floats; `out` must have room
/// for `out_cap` bytes.
#[no_mangle]
pub unsafe extern "C" fn somno_frame_encode(
    seq: u64,
    t0_ms: u64,
    n_channels: u16,
    n_samples: u32,
    samples: *const f32,
    out: *mut u8,
    out_cap: usize,
    out_len: *mut usize,
) -> SomnoStatus {
    guard(|| {
        let count = usize::from(n_channels) * n_samples as usize;
        let data = slice(samples, count, "samples")?.to_vec();
        let chunk = core(EegChunk::new(seq, t0_ms, n_channels, n_samples, data))?;
        let bytes = encode_chunk(&chunk).map_err(|e| invalid(e))?;
        emit(&bytes, out, out_cap, out_len)
    })
}

/// Decode the data frame at the start of `buf`. On success `*consumed` is the
/// frame length in bytes. Returns `SOMNO_STATUS_INCOMPLETE` if more bytes are
/// needed, `SOMNO_STATUS_FORMAT` on bad magic, CRC or payload.
///
/// # Safety
/// `buf` must hold `len` bytes; `samples` must have room for `samples_cap`
/// floats; the scalar outputs must be writable.
#[no_mangle]
pub unsafe extern "C" fn somno_frame_decode(
    buf: *const u8,
    len: usize,
    seq: *mut u64,
    t0_ms: *mut u64,
    n_channels: *mut u16,
    n_samples: *mut u32,
    samples: *mut f32,
    samples_cap: usize,
    samples_len: *mut usize,
    consumed: *mut usize,
) -> SomnoStatus {
    guard(|| {
        let bytes = slice(buf, len, "buf")?;
        for (p, name) in [
            (seq as *const u8, "seq"),
            (t0_ms as *const u8, "t0_ms"),
            (n_channels as *const u8, "n_channels"),
            (n_samples as *const u8, "n_samples"),
            (consumed as *const u8, "consumed"),
        ] {
            non_null(p, name)?;
        }
        let (frame, used) = decode_frame(bytes).map_err(|e| match e {
            FrameError::Incomplete { .. } => Fail::new(SomnoStatus::Incomplete, e),
            _ => Fail::new(SomnoStatus::Format, e),
        })?;
        let Frame::Data(chunk) = frame else {
            return Err(Fail::new(SomnoStatus::Format, "hello frame, not data"));
        };
        emit(&chunk.samples, samples, samples_cap, samples_len)?;
        *seq = chunk.seq;
        *t0_ms = chunk.t0_ms;
        *n_channels = chunk.n_channels;
        *n_samples = chunk.n_samples;
        *consumed = used;
        Ok(())
    })
}

/// Render a stimulus and write it as a 16-bit stereo 44.1 kHz WAV file.
/// Rain uses the built-in synthetic texture.
///
/// # Safety
/// `path` must be a NUL-terminated string.
#[no_mangle]
pub unsafe extern "C" fn somno_stim_write_wav(
    kind: u32,
    duration_s: f64,
    seed: u64,
    gain_dbfs: f64,
    path: *const c_char,
) -> SomnoStatus {
    guard(|| {
        let path = str_arg(path, "path")?;
        let buf = core(synth(stimulus_from_code(kind)?, duration_s, seed, gain_dbfs))?;
        core(write_wav(&buf, path))
    })
}

/// Start a session. The models are copied, so their handles may be freed
/// afterwards. `answers` is intake text (`key = value` lines). `policy` is
/// policy text, or NULL for the built-in placeholder; `force_stimulus` below
/// 0 uses the policy, otherwise it names the stimulus code to play.
///
/// # Safety
/// Handles must be live; strings NUL-terminated or NULL where allowed.
#[no_mangle]
pub unsafe extern "C" fn somno_session_new(
    stage: *const SomnoStageNet,
    experience: *const SomnoExperienceNet,
    answers: *const c_char,
    policy: *const c_char,
    force_stimulus: i32,
    stop_k: u32,
    gain_dbfs: f64,
    out: *mut *mut SomnoSession,
) -> SomnoStatus {
    guard(|| {
        non_null(out, "out")?;
        *out = ptr::null_mut();
        non_null(stage, "stage")?;
        non_null(experience, "experience")?;
        let profile = core(IntakeProfile::from_answers(&core(Answers::parse(str_arg(answers, "answers")?))?))?;
        let policy = if force_stimulus >= 0 {
            Policy::constant(stimulus_from_code(force_stimulus as u32)?)
        } else if policy.is_null() {
            Policy::builtin()
        } else {
            core(Policy::parse(str_arg(policy, "policy")?, "ffi"))?
        };
        let models = SessionModels {
            stage: Box::new((*stage).0.clone()),
            experience: (*experience).0.clone(),
        };
        let config = SessionConfig {
            stop_k: stop_k as usize,
            gain_dbfs,
            ..SessionConfig::default()
        };
        let mut c = core(SessionController::new(models, config))?;
        core(c.start(&profile, &policy))?;
        *out = Box::into_raw(Box::new(SomnoSession(c)));
        Ok(())
    })
}

/// # Safety
/// `session` must come from [`somno_session_new`] and not be freed twice.
#[no_mangle]
pub unsafe extern "C" fn somno_session_free(session: *mut SomnoSession) {
    if !session.is_null() {
        drop(Box::from_raw(session));
    }
}

/// Classify one preprocessed 30 s epoch (3000 samples at 100 Hz) and advance
/// the session.
///
/// # Safety
/// `session` must be live; `epoch` must hold `n` doubles.
#[no_mangle]
pub unsafe extern "C" fn somno_session_push_epoch(session: *mut SomnoSession, epoch: *const f64, n: usize) -> SomnoStatus {
    guard(|| {
        non_null(session, "session")?;
        if n != EPOCH_SAMPLES {
            return Err(invalid(format!("epoch has {n} samples, expected {EPOCH_SAMPLES}")));
        }
        let s = &mut (*session).0;
        let e = core(Epoch::new(s.stages().len(), slice(epoch, n, "epoch")?.to_vec(), STAGING_RATE_HZ))?;
        core(s.on_epoch(&e)).map(drop)
    })
}

/// Advance the session with an externally scored stage code.
///
/// # Safety
/// `session` must be live.
#[no_mangle]
pub unsafe extern "C" fn somno_session_push_stage(session: *mut SomnoSession, stage: u8) -> SomnoStatus {
    guard(|| {
        non_null(session, "session")?;
        core((*session).0.push_stage(stage_from_code(stage)?)).map(drop)
    })
}

/// # Safety
/// `session` must be live; `phase` writable.
#[no_mangle]
pub unsafe extern "C" fn somno_session_phase(session: *const SomnoSession, phase: *mut SomnoPhase) -> SomnoStatus {
    guard(|| {
        non_null(session, "session")?;
        non_null(phase, "phase")?;
        *phase = match (*session).0.phase() {
            Phase::Intake => SomnoPhase::Intake,
            Phase::Stimulating => SomnoPhase::Stimulating,
            Phase::Quiet => SomnoPhase::Quiet,
            Phase::Finalized => SomnoPhase::Finalized,
        };
        Ok(())
    })
}

/// Epoch at which the stimulus was stopped, or -1 while it is still playing.
///
/// # Safety
/// `session` must be live; `epoch` writable.
#[no_mangle]
pub unsafe extern "C" fn somno_session_stop_epoch(session: *const SomnoSession, epoch: *mut i64) -> SomnoStatus {
    guard(|| {
        non_null(session, "session")?;
        non_null(epoch, "epoch")?;
        *epoch = (*session).0.stop_epoch().map_or(-1, |e| e as i64);
        Ok(())
    })
}

/// The stimulus code selected at session start.
///
/// # Safety
/// `session` must be live; `kind` writable.
#[no_mangle]
pub unsafe extern "C" fn somno_session_stimulus(session: *const SomnoSession, kind: *mut u32) -> SomnoStatus {
    guard(|| {
        non_null(session, "session")?;
        non_null(kind, "kind")?;
        let k = (*session).0.stimulus().ok_or_else(|| Fail::new(SomnoStatus::WrongPhase, "no stimulus yet"))?;
        *kind = StimulusKind::ALL.iter().position(|&x| x == k).unwrap_or(0) as u32;
        Ok(())
    })
}

/// JSON report of a finalized session, NUL-terminated. `*out_len` includes
/// the terminator.
///
/// # Safety
/// `session` must be live; `out` must have room for `out_cap` bytes.
#[no_mangle]
pub unsafe extern "C" fn somno_session_report_json(
    session: *const SomnoSession,
    out: *mut c_char,
    out_cap: usize,
    out_len: *mut usize,
) -> SomnoStatus {
    guard(|| {
        non_null(session, "session")?;
        let report = core((*session).0.finalize())?;
        let text = CString::new(report.to_json()).map_err(|e| invalid(e))?;
        let bytes = text.as_bytes_with_nul();
        emit(bytes, out.cast::<u8>(), out_cap, out_len)
    })
}
