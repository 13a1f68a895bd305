//! The `somno` command line. Exit codes: 0 success, 1 runtime failure,
//! 2 usage error.

use std::ffi::OsString;
use std::fs;
use std::net::TcpListener;
use std::path::{Path, PathBuf};
use std::time::Duration;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};
use sha2::{Digest, Sha256};

use crate::checkpoint::{load_stage, save_stage};
use crate::config::RunConfig;
use crate::experience::{
    accuracy, load_experience, loso_evaluate, macro_f1, save_experience, synthetic_corpus, train_experience,
    CorpusParams, EvalReport, ExperienceTrainConfig, SleepExperience, StageSequence, SubjectDataset,
};
use crate::intake::{Answers, IntakeProfile, Policy};
use crate::session::{start_session, SessionConfig, SessionModels};
use crate::signal::{epoch_split, preprocess, Epoch};
use crate::stage::{train, StageLabel, TrainConfig};
use crate::stimulus::{db_target_to_gain, synth_with, wav_bytes, StimulusKind, SynthOptions};
use crate::stream::{
    chunks_to_record, montage_64, replay_file, serve, synth_eeg, EegChunk, Pacing, StageScript, StreamClient,
    StreamError, StreamHeader,
};
use crate::synthetic::staging_set;

#[derive(Debug, Parser)]
#[command(name = "somno", version, about = "Closed-loop sleep-induction engine")]
pub struct Cli {
    /// Flat key = value configuration file; flags override its values.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Train the epoch stager and write a checkpoint.
    TrainStage(TrainStageArgs),
    /// Train the sleep-experience classifier and write a checkpoint.
    TrainExperience(TrainExperienceArgs),
    /// Leave-one-subject-out evaluation, or average a score table.
    EvalLoso(EvalLosoArgs),
    /// Run one closed-loop session and write its report and log.
    RunSession(RunSessionArgs),
    /// Render a stimulus to a WAV file.
    SynthStim(SynthStimArgs),
    /// Stimulus tools.
    Stim {
        #[command(subcommand)]
        command: StimCommand,
    },
    /// Score an intake answer file and show the selected stimulus.
    ScoreIntake(ScoreIntakeArgs),
    /// Serve EEG over TCP.
    Stream {
        #[command(subcommand)]
        command: StreamCommand,
    },
}

#[derive(Debug, Subcommand)]
pub enum StimCommand {
    /// Render a stimulus to a WAV file.
    Synth(SynthStimArgs),
}

#[derive(Debug, Subcommand)]
pub enum StreamCommand {
    /// Serve a replay file to one client.
    Serve {
        #[arg(long)]
        file: PathBuf,
        #[arg(long)]
        port: Option<u16>,
        /// Pace chunks at one per second.
        #[arg(long)]
        realtime: bool,
    },
    /// Serve a synthetic stage-scripted stream to one client.
    Synth {
        /// Script such as `W:180,N:420`.
        #[arg(long)]
        script: String,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        port: Option<u16>,
        #[arg(long)]
        realtime: bool,
    },
}

#[derive(Debug, Args)]
pub struct TrainStageArgs {
    /// Train on the synthetic band-signature corpus.
    #[arg(long, conflicts_with_all = ["replay", "labels"])]
    pub synthetic: bool,
    /// Replay file whose Pz-Oz epochs form the training set.
    #[arg(long, requires = "labels")]
    pub replay: Option<PathBuf>,
    /// One stage letter per epoch of `--replay` (`W`, `N`, `R`; `-` skips).
    #[arg(long, requires = "replay")]
    pub labels: Option<PathBuf>,
    /// Epochs per class in the synthetic training split.
    #[arg(long, default_value_t = 200)]
    pub per_class: usize,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long, default_value_t = 16)]
    pub hidden: usize,
    #[arg(long)]
    pub epochs: Option<usize>,
    #[arg(long)]
    pub lr: Option<f64>,
    #[arg(long, short)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct TrainExperienceArgs {
    /// Train on the synthetic rule-labeled corpus.
    #[arg(long, conflicts_with = "corpus")]
    pub synthetic: bool,
    /// Tab-separated `subject  sequence  slept|not-slept` lines.
    #[arg(long)]
    pub corpus: Option<PathBuf>,
    /// Sessions per synthetic subject in the training split.
    #[arg(long, default_value_t = 40)]
    pub per_subject: usize,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub epochs: Option<usize>,
    #[arg(long)]
    pub lr: Option<f64>,
    #[arg(long, short)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct EvalLosoArgs {
    /// Average an existing per-subject `subject acc f1` table.
    #[arg(long, conflicts_with_all = ["corpus", "synthetic"])]
    pub table: Option<PathBuf>,
    #[arg(long, conflicts_with = "synthetic")]
    pub corpus: Option<PathBuf>,
    #[arg(long)]
    pub synthetic: bool,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub json: Option<PathBuf>,
    #[arg(long)]
    pub out_table: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct RunSessionArgs {
    /// Intake answers (`key = value`).
    #[arg(long)]
    pub answers: PathBuf,
    #[arg(long)]
    pub policy: Option<PathBuf>,
    /// Bypass the policy and use this stimulus.
    #[arg(long)]
    pub force_stimulus: Option<StimulusKind>,
    #[arg(long)]
    pub stage_checkpoint: Option<PathBuf>,
    #[arg(long)]
    pub experience_checkpoint: Option<PathBuf>,
    /// Synthetic stream from a stage script such as `W:180,N:420`.
    #[arg(long, conflicts_with_all = ["replay", "connect"])]
    pub script: Option<String>,
    #[arg(long, conflicts_with = "connect")]
    pub replay: Option<PathBuf>,
    /// `host:port` of a running `somno stream` server.
    #[arg(long)]
    pub connect: Option<String>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub stop_k: Option<usize>,
    #[arg(long)]
    pub rearm_after_wake: Option<usize>,
    #[arg(long)]
    pub calibration_db_spl: Option<f64>,
    #[arg(long)]
    pub target_db_spl: Option<f64>,
    #[arg(long)]
    pub report: Option<PathBuf>,
    #[arg(long)]
    pub log: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct SynthStimArgs {
    #[arg(long)]
    pub kind: StimulusKind,
    #[arg(long, default_value_t = 10.0)]
    pub duration: f64,
    #[arg(long)]
    pub seed: Option<u64>,
    /// Peak level in dBFS (≤ 0). Overrides the calibration route.
    #[arg(long, allow_hyphen_values = true)]
    pub gain: Option<f64>,
    #[arg(long)]
    pub target_db_spl: Option<f64>,
    #[arg(long)]
    pub calibration_db_spl: Option<f64>,
    #[arg(long)]
    pub rain_file: Option<PathBuf>,
    #[arg(long, short)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct ScoreIntakeArgs {
    #[arg(long)]
    pub answers: PathBuf,
    #[arg(long)]
    pub policy: Option<PathBuf>,
}

/// Parse `args` (including the program name) and run. Returns the exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return e.exit_code();
        }
    };
    match execute(cli) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e:#}");
            1
        }
    }
}

pub fn execute(cli: Cli) -> Result<()> {
    let cfg = match &cli.config {
        Some(p) => RunConfig::load(p).with_context(|| format!("reading config {}", p.display()))?,
        None => RunConfig::default(),
    };
    match cli.command {
        Command::TrainStage(a) => train_stage(a, &cfg),
        Command::TrainExperience(a) => train_experience_cmd(a, &cfg),
        Command::EvalLoso(a) => eval_loso(a, &cfg),
        Command::RunSession(a) => run_session(a, &cfg),
        Command::SynthStim(a) | Command::Stim { command: StimCommand::Synth(a) } => synth_stim(a, &cfg),
        Command::ScoreIntake(a) => score_intake(a, &cfg),
        Command::Stream { command } => stream(command, &cfg),
    }
}

fn sha256_hex(bytes: &[u8]) -> String {
    Sha256::digest(bytes).iter().map(|b| format!("{b:02x}")).collect()
}

fn read_profile(path: &Path) -> Result<IntakeProfile> {
    let answers = Answers::load(path).with_context(|| format!("answers {}", path.display()))?;
    IntakeProfile::from_answers(&answers).with_context(|| format!("scoring {}", path.display()))
}

fn load_policy(path: Option<&Path>) -> Result<Policy> {
    match path {
        Some(p) => Policy::load(p).with_context(|| format!("policy {}", p.display())),
        None => Ok(Policy::builtin()),
    }
}

fn stage_accuracy(net: &crate::stage::StageNet, data: &[(Epoch, StageLabel)]) -> f64 {
    let correct = data.iter().filter(|(e, y)| net.predict_stage(e) == *y).count();
    correct as f64 / data.len().max(1) as f64
}

fn labeled_replay(replay: &Path, labels: &Path) -> Result<Vec<(Epoch, StageLabel)>> {
    let stream = replay_file(replay, Pacing::Unpaced).with_context(|| format!("replay {}", replay.display()))?;
    let header = stream.header().clone();
    let chunks = stream.collect::<std::result::Result<Vec<_>, _>>()?;
    let epochs = epoch_split(&preprocess(&chunks_to_record(&header, &chunks)?)?)?;
    let text = fs::read_to_string(labels).with_context(|| format!("labels {}", labels.display()))?;
    let letters: Vec<char> = text.chars().filter(|c| !c.is_whitespace() && *c != ',').collect();
    if letters.len() != epochs.len() {
        bail!("{} labels for {} epochs", letters.len(), epochs.len());
    }
    let mut out = Vec::new();
    for (e, c) in epochs.into_iter().zip(letters) {
        if c == '-' {
            continue;
        }
        out.push((e, c.to_string().parse::<StageLabel>()?));
    }
    Ok(out)
}

fn train_stage(a: TrainStageArgs, cfg: &RunConfig) -> Result<()> {
    let seed = a.seed.unwrap_or(cfg.seed);
    let mut tc = TrainConfig {
        hidden: a.hidden,
        ..TrainConfig::synthetic(seed)
    };
    if let Some(e) = a.epochs {
        tc.epochs = e;
    }
    if let Some(lr) = a.lr {
        tc.adam.lr = lr;
    }
    let (train_set, held_out) = if a.synthetic {
        (
            staging_set(a.per_class, seed)?,
            staging_set((a.per_class / 4).max(1), seed.wrapping_add(1))?,
        )
    } else if let (Some(r), Some(l)) = (&a.replay, &a.labels) {
        let mut all = labeled_replay(r, l)?;
        let cut = all.len() * 4 / 5;
        let held = all.split_off(cut);
        (all, held)
    } else {
        bail!("choose a training set: --synthetic or --replay with --labels");
    };
    let (net, history) = train(&train_set, &tc)?;
    save_stage(&net, &tc, &a.out).with_context(|| format!("writing {}", a.out.display()))?;
    let last = history.final_stats().expect("history has the initial point");
    println!("train_accuracy\t{:.4}", last.accuracy);
    println!("train_loss\t{:.6}", last.loss);
    if !held_out.is_empty() {
        println!("heldout_accuracy\t{:.4}", stage_accuracy(&net, &held_out));
    }
    println!("checkpoint\t{}", a.out.display());
    println!("sha256\t{}", sha256_hex(&fs::read(&a.out)?));
    Ok(())
}

fn parse_corpus(text: &str) -> Result<Vec<SubjectDataset>> {
    let mut subjects: Vec<SubjectDataset> = Vec::new();
    for (i, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let cols: Vec<&str> = line.split('\t').collect();
        if cols.len() != 3 {
            bail!("corpus line {}: expected subject<TAB>sequence<TAB>label", i + 1);
        }
        let seq: StageSequence = cols[1].parse().with_context(|| format!("corpus line {}", i + 1))?;
        let y: SleepExperience = cols[2].parse().with_context(|| format!("corpus line {}", i + 1))?;
        match subjects.iter_mut().find(|s| s.id == cols[0]) {
            Some(s) => s.samples.push((seq, y)),
            None => subjects.push(SubjectDataset {
                id: cols[0].to_string(),
                samples: vec![(seq, y)],
            }),
        }
    }
    Ok(subjects)
}

fn experience_config(seed: u64, epochs: Option<usize>, lr: Option<f64>) -> ExperienceTrainConfig {
    let mut c = ExperienceTrainConfig::synthetic(seed);
    if let Some(e) = epochs {
        c.epochs = e;
    }
    if let Some(lr) = lr {
        c.adam.lr = lr;
    }
    c
}

fn train_experience_cmd(a: TrainExperienceArgs, cfg: &RunConfig) -> Result<()> {
    let seed = a.seed.unwrap_or(cfg.seed);
    let tc = experience_config(seed, a.epochs, a.lr);
    let (corpus, held_out) = if a.synthetic {
        let p = CorpusParams {
            seed,
            per_subject: a.per_subject,
            ..CorpusParams::default()
        };
        let held = CorpusParams {
            seed: seed.wrapping_add(1),
            per_subject: 10,
            ..p
        };
        (synthetic_corpus(&p), synthetic_corpus(&held))
    } else if let Some(path) = &a.corpus {
        let text = fs::read_to_string(path).with_context(|| format!("corpus {}", path.display()))?;
        (parse_corpus(&text)?, Vec::new())
    } else {
        bail!("choose a training set: --synthetic or --corpus");
    };
    let (net, history) = train_experience(&corpus, &tc)?;
    save_experience(&net, &tc, &a.out).with_context(|| format!("writing {}", a.out.display()))?;
    let last = history.final_stats().expect("history has the initial point");
    println!("train_accuracy\t{:.4}", last.accuracy);
    if !held_out.is_empty() {
        let samples: Vec<_> = held_out.iter().flat_map(|s| s.samples.iter()).collect();
        let preds: Vec<_> = samples.iter().map(|(s, _)| net.predict(s).0).collect();
        let labels: Vec<_> = samples.iter().map(|(_, y)| *y).collect();
        println!("heldout_accuracy\t{:.4}", accuracy(&preds, &labels)?);
        println!("heldout_macro_f1\t{:.4}", macro_f1(&preds, &labels, &SleepExperience::ALL)?);
    }
    println!("checkpoint\t{}", a.out.display());
    println!("sha256\t{}", sha256_hex(&fs::read(&a.out)?));
    Ok(())
}

fn eval_loso(a: EvalLosoArgs, cfg: &RunConfig) -> Result<()> {
    let seed = a.seed.unwrap_or(cfg.seed);
    let report = if let Some(t) = &a.table {
        EvalReport::load_table(t).with_context(|| format!("table {}", t.display()))?
    } else if let Some(c) = &a.corpus {
        let text = fs::read_to_string(c).with_context(|| format!("corpus {}", c.display()))?;
        loso_evaluate(&parse_corpus(&text)?, &experience_config(seed, None, None))?
    } else if a.synthetic {
        let corpus = synthetic_corpus(&CorpusParams {
            seed,
            ..CorpusParams::default()
        });
        loso_evaluate(&corpus, &experience_config(seed, None, None))?
    } else {
        bail!("choose an input: --table, --corpus or --synthetic");
    };
    let table = report.to_table();
    print!("{table}");
    if let Some(p) = &a.out_table {
        fs::write(p, &table)?;
    }
    if let Some(p) = &a.json {
        fs::write(p, report.to_json())?;
    }
    Ok(())
}

fn session_gain(target: f64, calibration: Option<f64>) -> Result<f64> {
    match calibration {
        Some(_) => Ok(db_target_to_gain(target, calibration)?),
        None => {
            log::warn!("no calibration_db_spl configured; assuming -40 dBFS playback level");
            Ok(-40.0)
        }
    }
}

fn run_session(a: RunSessionArgs, cfg: &RunConfig) -> Result<()> {
    let stage_path = a
        .stage_checkpoint
        .or_else(|| cfg.stage_checkpoint.clone())
        .context("no stage checkpoint (set --stage-checkpoint or stage_checkpoint)")?;
    let exp_path = a
        .experience_checkpoint
        .or_else(|| cfg.experience_checkpoint.clone())
        .context("no experience checkpoint (set --experience-checkpoint or experience_checkpoint)")?;
    // models load and validate before any audio command is issued
    let stage = load_stage(&stage_path).with_context(|| format!("stage checkpoint {}", stage_path.display()))?;
    stage.validate()?;
    let experience = load_experience(&exp_path).with_context(|| format!("experience checkpoint {}", exp_path.display()))?;

    let profile = read_profile(&a.answers)?;
    let policy = match a.force_stimulus {
        Some(kind) => Policy::constant(kind),
        None => load_policy(a.policy.as_deref().or(cfg.policy.as_deref()))?,
    };
    let session_cfg = SessionConfig {
        stop_k: a.stop_k.unwrap_or(cfg.stop_k),
        rearm_after_wake: a.rearm_after_wake.or(cfg.rearm_after_wake),
        gain_dbfs: session_gain(a.target_db_spl.unwrap_or(cfg.target_db_spl), a.calibration_db_spl.or(cfg.calibration_db_spl))?,
    };
    let models = SessionModels {
        stage: Box::new(stage),
        experience,
    };
    let (mut controller, _) = start_session(&profile, &policy, models, session_cfg)?;

    let seed = a.seed.unwrap_or(cfg.seed);
    let (header, source): (StreamHeader, Box<dyn Iterator<Item = std::result::Result<EegChunk, StreamError>>>) =
        if let Some(s) = &a.script {
            let gen = synth_eeg(&StageScript::parse(s, seed)?, &montage_64())?;
            (gen.header(), Box::new(gen))
        } else if let Some(r) = &a.replay {
            let rep = replay_file(r, Pacing::Unpaced).with_context(|| format!("replay {}", r.display()))?;
            (rep.header().clone(), Box::new(rep))
        } else if let Some(addr) = &a.connect {
            let client = StreamClient::connect(addr.as_str(), cfg.queue_capacity)?;
            (client.header().clone(), Box::new(client))
        } else {
            bail!("choose an EEG source: --script, --replay or --connect");
        };
    controller.attach_stream(header);
    controller.drive(source)?;
    let report = controller.finalize().context("stream ended before 20 epochs")?;
    let json = report.to_json();
    let log = controller.log().to_text();
    print!("{log}");
    println!("report_sha256\t{}", report.sha256());
    if let Some(p) = &a.report {
        fs::write(p, &json)?;
    }
    if let Some(p) = &a.log {
        fs::write(p, &log)?;
    }
    Ok(())
}

fn synth_stim(a: SynthStimArgs, cfg: &RunConfig) -> Result<()> {
    let gain = match a.gain {
        Some(g) => g,
        None => db_target_to_gain(a.target_db_spl.unwrap_or(cfg.target_db_spl), a.calibration_db_spl.or(cfg.calibration_db_spl))?,
    };
    let opts = SynthOptions {
        rain_file: a.rain_file.or_else(|| cfg.rain_file.clone()),
        no_rain_fallback: false,
    };
    let buf = synth_with(a.kind, a.duration, a.seed.unwrap_or(cfg.seed), gain, &opts)?;
    let bytes = wav_bytes(&buf)?;
    fs::write(&a.out, &bytes).with_context(|| format!("writing {}", a.out.display()))?;
    if buf.synthetic_rain {
        println!("note\tsynthetic rain (no rain_file supplied)");
    }
    println!("kind\t{}", buf.kind);
    println!("samples\t{}", buf.len());
    println!("gain_dbfs\t{gain}");
    println!("sha256\t{}", sha256_hex(&bytes));
    Ok(())
}

fn score_intake(a: ScoreIntakeArgs, cfg: &RunConfig) -> Result<()> {
    let profile = read_profile(&a.answers)?;
    let policy = load_policy(a.policy.as_deref().or(cfg.policy.as_deref()))?;
    print!("{}", profile.summary());
    println!("stimulus = {}", policy.select(&profile));
    println!("policy = {}", policy.name);
    Ok(())
}

fn stream(cmd: StreamCommand, cfg: &RunConfig) -> Result<()> {
    let pacing = |realtime: bool| {
        if realtime {
            Pacing::Realtime
        } else {
            Pacing::Unpaced
        }
    };
    let (port, header, source): (u16, StreamHeader, Box<dyn Iterator<Item = std::result::Result<EegChunk, StreamError>> + Send>) =
        match cmd {
            StreamCommand::Serve { file, port, realtime } => {
                let rep = replay_file(&file, pacing(realtime)).with_context(|| format!("replay {}", file.display()))?;
                (port.unwrap_or(cfg.port), rep.header().clone(), Box::new(rep))
            }
            StreamCommand::Synth {
                script,
                seed,
                port,
                realtime,
            } => {
                let gen = synth_eeg(&StageScript::parse(&script, seed.unwrap_or(cfg.seed))?, &montage_64())?;
                let header = gen.header();
                let src: Box<dyn Iterator<Item = _> + Send> = if realtime {
                    Box::new(gen.inspect(|_| std::thread::sleep(Duration::from_secs(1))))
                } else {
                    Box::new(gen)
                };
                (port.unwrap_or(cfg.port), header, src)
            }
        };
    let listener = TcpListener::bind(("0.0.0.0", port)).with_context(|| format!("binding port {port}"))?;
    eprintln!("listening on {}", listener.local_addr()?);
    let sent = serve(&listener, &header, source, cfg.queue_capacity)?;
    println!("frames_sent\t{sent}");
    Ok(())
}
