use std::ffi::OsString;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use loopwork_core::datagen::{generate_suite, generate_task_suite, Tier};
use loopwork_core::metrics::{evaluate, EvalReport, Prediction};
use loopwork_core::model::Task;
use loopwork_core::period::WindowToken;
use loopwork_core::pipeline::{detect_anomaly, track};
use loopwork_core::stream::AnomalyReport;
use loopwork_core::{Config, GroundTruth, Interval, KChoice};
use rayon::prelude::*;
use serde::Serialize;

use crate::batch::{match_by_id, predict_all, MinedDocument};
use crate::error::CliError;
use crate::formats::{
    list_with_suffix, read_json, read_sequence, stem, write_json, write_sequence, MINED_SUFFIX, PREDICTION_SUFFIX,
    SEQUENCE_EXT, TRUTH_SUFFIX,
};

#[derive(Debug, Parser)]
#[command(name = "loopwork", version, about = "Mine periodic workflows from long feature sequences")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Write a synthetic suite of sequence and ground-truth files
    Generate(GenerateArgs),
    /// Mine the workflow and period boundaries of one sequence
    Mine(MineArgs),
    /// Run the full pipeline over a directory of sequences and write predictions
    Predict(PredictArgs),
    /// Estimate the remaining share of the open period at the end of a sequence
    Track(ReplayArgs),
    /// Localize the longest deviation from a mined workflow
    DetectAnomaly(ReplayArgs),
    /// Score predictions against ground truth
    Evaluate(EvaluateArgs),
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum TierArg {
    Clean,
    Jittered,
    Noisy,
    Overlapping,
}

impl From<TierArg> for Tier {
    fn from(t: TierArg) -> Tier {
        match t {
            TierArg::Clean => Tier::Clean,
            TierArg::Jittered => Tier::Jittered,
            TierArg::Noisy => Tier::Noisy,
            TierArg::Overlapping => Tier::Overlapping,
        }
    }
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum TaskArg {
    /// Cycle through period, completion and anomaly
    Mixed,
    Period,
    Completion,
    Anomaly,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum TokenArg {
    Soft,
    Hard,
}

#[derive(Debug, Args)]
pub struct GenerateArgs {
    #[arg(long, value_enum, default_value_t = TierArg::Clean)]
    pub tier: TierArg,
    #[arg(long, default_value_t = 10)]
    pub count: usize,
    #[arg(long, value_enum, default_value_t = TaskArg::Mixed)]
    pub task: TaskArg,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Output directory (created if missing)
    #[arg(long, default_value = ".")]
    pub out: PathBuf,
}

/// Pipeline settings shared by every command that mines.
#[derive(Debug, Args)]
pub struct ConfigArgs {
    /// Alphabet size, or `auto` to pick it at the inertia elbow over 6..=14
    #[arg(long, default_value = "auto", value_parser = parse_k)]
    pub k: KChoice,
    /// Segment buffer as a fraction of the period window
    #[arg(long, default_value_t = 0.2)]
    pub buffer: f64,
    /// Spectral window candidates kept for re-ranking
    #[arg(long, default_value_t = 3)]
    pub top_f: usize,
    /// Largest segment count aligned jointly; more use progressive alignment
    #[arg(long, default_value_t = 4)]
    pub max_joint: usize,
    /// Keep the spectral order of window candidates
    #[arg(long)]
    pub no_rerank: bool,
    /// Token representation for the window spectrum
    #[arg(long, value_enum, default_value_t = TokenArg::Soft)]
    pub window_token: TokenArg,
    #[arg(long, default_value_t = 3)]
    pub min_anomaly_frames: usize,
    #[arg(long, default_value_t = 5)]
    pub merge_gap: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
}

fn parse_k(s: &str) -> Result<KChoice, String> {
    if s.eq_ignore_ascii_case("auto") {
        return Ok(KChoice::default());
    }
    match s.parse::<usize>() {
        Ok(k) if k >= 2 => Ok(KChoice::Fixed(k)),
        _ => Err(format!("expected `auto` or an integer >= 2, got `{s}`")),
    }
}

impl ConfigArgs {
    pub fn config(&self) -> Result<Config, CliError> {
        if !(0.0..0.5).contains(&self.buffer) {
            return Err(CliError::usage(format!("--buffer must lie in [0, 0.5), got {}", self.buffer)));
        }
        if self.top_f == 0 {
            return Err(CliError::usage("--top-f must be at least 1"));
        }
        let mut cfg = Config { k: self.k, seed: self.seed, ..Config::default() };
        cfg.miner.buffer = self.buffer;
        cfg.miner.align.max_joint = self.max_joint;
        cfg.period.top_f = self.top_f;
        cfg.period.rerank = !self.no_rerank;
        cfg.period.window_token = match self.window_token {
            TokenArg::Soft => WindowToken::Soft,
            TokenArg::Hard => WindowToken::Hard,
        };
        cfg.stream.min_anomaly_frames = self.min_anomaly_frames;
        cfg.stream.merge_gap = self.merge_gap;
        Ok(cfg)
    }
}

#[derive(Debug, Args)]
pub struct MineArgs {
    /// Sequence file
    pub sequence: PathBuf,
    #[command(flatten)]
    pub config: ConfigArgs,
    #[arg(long, default_value = ".")]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct PredictArgs {
    /// Directory of sequence files
    pub sequences: PathBuf,
    #[command(flatten)]
    pub config: ConfigArgs,
    #[arg(long, default_value = ".")]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct ReplayArgs {
    /// Sequence file
    pub sequence: PathBuf,
    /// Mined workflow written by `mine`
    #[arg(long)]
    pub workflow: PathBuf,
    #[arg(long, default_value_t = 3)]
    pub min_anomaly_frames: usize,
    #[arg(long, default_value_t = 5)]
    pub merge_gap: usize,
    #[arg(long, default_value = ".")]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct EvaluateArgs {
    /// Directory of prediction files
    #[arg(long)]
    pub pred: PathBuf,
    /// Directory of ground-truth files
    #[arg(long)]
    pub gt: PathBuf,
    /// Report file
    #[arg(long, default_value = "report.json")]
    pub out: PathBuf,
}

/// Parses `args` and runs the command, returning the process exit code.
pub fn main_with<I, T>(args: I, out: &mut dyn Write, err: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let text = e.render().to_string();
            let _ = if code == 0 { out.write_all(text.as_bytes()) } else { err.write_all(text.as_bytes()) };
            return code;
        }
    };
    match run(cli.command, out, err) {
        Ok(()) => 0,
        Err(e) => {
            let _ = writeln!(err, "error: {e}");
            e.exit_code()
        }
    }
}

pub fn run(command: Command, out: &mut dyn Write, err: &mut dyn Write) -> Result<(), CliError> {
    match command {
        Command::Generate(a) => cmd_generate(&a, out),
        Command::Mine(a) => cmd_mine(&a, out),
        Command::Predict(a) => cmd_predict(&a, out, err),
        Command::Track(a) => cmd_track(&a, out),
        Command::DetectAnomaly(a) => cmd_detect_anomaly(&a, out),
        Command::Evaluate(a) => cmd_evaluate(&a, out),
    }
}

fn say(out: &mut dyn Write, text: std::fmt::Arguments) -> Result<(), CliError> {
    writeln!(out, "{text}").map_err(|e| CliError::internal(format!("stdout: {e}")))
}

fn ensure_dir(dir: &Path) -> Result<(), CliError> {
    fs::create_dir_all(dir).map_err(|e| CliError::write(dir, e))
}

pub fn cmd_generate(a: &GenerateArgs, out: &mut dyn Write) -> Result<(), CliError> {
    if a.count == 0 {
        return Err(CliError::usage("--count must be at least 1"));
    }
    let tier = Tier::from(a.tier);
    let items = match a.task {
        TaskArg::Mixed => generate_suite(tier, a.count, a.seed)?,
        TaskArg::Period => generate_task_suite(tier, Task::Period, a.count, a.seed)?,
        TaskArg::Completion => generate_task_suite(tier, Task::Completion, a.count, a.seed)?,
        TaskArg::Anomaly => generate_task_suite(tier, Task::Anomaly, a.count, a.seed)?,
    };
    ensure_dir(&a.out)?;
    items.par_iter().try_for_each(|g| {
        let id = g.sequence.id();
        write_sequence(&a.out.join(format!("{id}.{SEQUENCE_EXT}")), &g.sequence)?;
        write_json(&a.out.join(format!("{id}{TRUTH_SUFFIX}")), &g.truth)
    })?;
    say(out, format_args!("wrote {} sequences to {}", items.len(), a.out.display()))
}

pub fn cmd_mine(a: &MineArgs, out: &mut dyn Write) -> Result<(), CliError> {
    let cfg = a.config.config()?;
    let seq = read_sequence(&a.sequence)?;
    let analysis = loopwork_core::analyze(&seq, &cfg)?;
    let doc = MinedDocument {
        id: seq.id().to_string(),
        count: analysis.periods.count(),
        workflow: analysis.mining.workflow.to_string(),
        periods: analysis.periods,
        result: analysis.mining,
    };
    ensure_dir(&a.out)?;
    write_json(&a.out.join(format!("{}{MINED_SUFFIX}", doc.id)), &doc)?;
    say(out, format_args!("count: {}", doc.count))?;
    say(out, format_args!("workflow: {}", doc.workflow))
}

pub fn cmd_predict(a: &PredictArgs, out: &mut dyn Write, err: &mut dyn Write) -> Result<(), CliError> {
    let cfg = a.config.config()?;
    let suffix = format!(".{SEQUENCE_EXT}");
    let paths = list_with_suffix(&a.sequences, &suffix)?;
    if paths.is_empty() {
        return Err(CliError::data(format!("no sequence files in {}", a.sequences.display())));
    }
    let seqs = paths.iter().map(|p| read_sequence(p)).collect::<Result<Vec<_>, _>>()?;
    ensure_dir(&a.out)?;
    let results = predict_all(&seqs, &cfg);
    for (pred, failure) in &results {
        if let Some(msg) = failure {
            let _ = writeln!(err, "warning: {msg}");
        }
        write_json(&a.out.join(format!("{}{PREDICTION_SUFFIX}", pred.id)), pred)?;
    }
    say(out, format_args!("wrote {} predictions to {}", results.len(), a.out.display()))
}

#[derive(Debug, Serialize)]
struct TrackDocument {
    id: String,
    remaining: f64,
}

#[derive(Debug, Serialize)]
struct AnomalyDocument {
    id: String,
    frames: Option<Interval>,
    seconds: Option<Interval>,
}

fn load_replay(a: &ReplayArgs) -> Result<(loopwork_core::FeatureSequence, MinedDocument), CliError> {
    let mined: MinedDocument = read_json(&a.workflow)?;
    let seq = read_sequence(&a.sequence)?;
    Ok((seq, mined))
}

fn stream_config(a: &ReplayArgs) -> loopwork_core::stream::StreamConfig {
    loopwork_core::stream::StreamConfig {
        min_anomaly_frames: a.min_anomaly_frames,
        merge_gap: a.merge_gap,
        ..Default::default()
    }
}

pub fn cmd_track(a: &ReplayArgs, out: &mut dyn Write) -> Result<(), CliError> {
    let (seq, mined) = load_replay(a)?;
    let est = track(&seq, &mined.result, &stream_config(a))?;
    ensure_dir(&a.out)?;
    let doc = TrackDocument { id: seq.id().to_string(), remaining: est.remaining };
    write_json(&a.out.join(format!("{}.track.json", doc.id)), &doc)?;
    say(out, format_args!("remaining: {:.4}", est.remaining))
}

pub fn cmd_detect_anomaly(a: &ReplayArgs, out: &mut dyn Write) -> Result<(), CliError> {
    let (seq, mined) = load_replay(a)?;
    let AnomalyReport { interval } = detect_anomaly(&seq, &mined.result, &stream_config(a))?;
    ensure_dir(&a.out)?;
    let doc = AnomalyDocument {
        id: seq.id().to_string(),
        frames: interval,
        seconds: interval.map(|iv| iv.to_seconds(seq.frame_rate())),
    };
    write_json(&a.out.join(format!("{}.anomaly.json", doc.id)), &doc)?;
    match (doc.frames, doc.seconds) {
        (Some(f), Some(s)) => say(
            out,
            format_args!(
                "anomaly: frames [{}, {}) seconds [{:.3}, {:.3})",
                f.start(),
                f.end(),
                s.start(),
                s.end()
            ),
        ),
        _ => say(out, format_args!("anomaly: none")),
    }
}

fn load_dir<T: serde::de::DeserializeOwned>(dir: &Path, suffix: &str) -> Result<Vec<(String, T)>, CliError> {
    list_with_suffix(dir, suffix)?
        .iter()
        .map(|p| Ok((stem(p, suffix).unwrap_or_default(), read_json(p)?)))
        .collect()
}

pub fn cmd_evaluate(a: &EvaluateArgs, out: &mut dyn Write) -> Result<(), CliError> {
    let preds: Vec<Prediction> = load_dir(&a.pred, PREDICTION_SUFFIX)?.into_iter().map(|(_, p)| p).collect();
    if preds.is_empty() {
        return Err(CliError::data(format!("no prediction files in {}", a.pred.display())));
    }
    let truths: Vec<GroundTruth> = load_dir(&a.gt, TRUTH_SUFFIX)?.into_iter().map(|(_, g)| g).collect();
    let report = evaluate(&match_by_id(preds, truths)?)?;
    write_json(&a.out, &report)?;
    print_report(&report, out)
}

pub fn print_report(report: &EvalReport, out: &mut dyn Write) -> Result<(), CliError> {
    let show = |x: Option<f64>| x.map_or_else(|| "n/a".to_string(), |v| format!("{v:.4}"));
    say(out, format_args!("mape: {}", show(report.mape)))?;
    say(out, format_args!("tiou_period: {}", show(report.tiou_period)))?;
    say(out, format_args!("mae: {}", show(report.mae)))?;
    say(out, format_args!("tiou_anomaly: {}", show(report.tiou_anomaly)))
}
