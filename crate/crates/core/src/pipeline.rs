//! End-to-end analysis of one sequence: mine the workflow, then replay the
//! transcript through the stream tracker.

use serde::{Deserialize, Serialize};

use alloc::string::String;

use crate::error::{Error, Result};
use crate::metrics::Prediction;
use crate::miner::{mine, MinerConfig, MiningResult};
use crate::tokenizer::hard_tokenize;
use crate::model::{FeatureSequence, Interval, PeriodSegmentation};
use crate::period::PeriodConfig;
use crate::stream::{
    detect_periods, longest_deviation, remaining_from, run, AnomalyReport, CompletionEstimate, StreamConfig, StreamState,
};

pub use crate::miner::KChoice;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
#[serde(default)]
pub struct Config {
    pub k: KChoice,
    /// Z-score each feature before clustering.
    pub normalize: bool,
    pub seed: u64,
    pub period: PeriodConfig,
    pub miner: MinerConfig,
    pub stream: StreamConfig,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Analysis {
    pub mining: MiningResult,
    /// Completed periods found by replaying the transcript against the
    /// mined workflow.
    pub periods: PeriodSegmentation,
    /// Remaining share of the trailing open period, if one is open.
    pub remaining: Option<f64>,
    /// Longest sustained deviation from the workflow.
    pub anomaly: Option<Interval>,
}

pub fn analyze(seq: &FeatureSequence, cfg: &Config) -> Result<Analysis> {
    let mining = mine(seq, cfg.k, cfg.normalize, cfg.seed, &cfg.period, &cfg.miner)?;
    let periods = detect_periods(&mining.transcript, &mining.workflow, &cfg.stream);
    let state = run(&mining.transcript.tokens, &mining.workflow, &cfg.stream);
    let remaining = open_remaining(&state, &mining)?;
    let anomaly = anomaly_of(&state, &cfg.stream).interval;
    Ok(Analysis { mining, periods, remaining, anomaly })
}

/// Tokenizes `seq` with a previously mined codebook and streams it through
/// the mined workflow.
pub fn replay(seq: &FeatureSequence, mining: &MiningResult, cfg: &StreamConfig) -> Result<StreamState> {
    let hard = hard_tokenize(seq, &mining.codebook)?;
    Ok(run(&hard.tokens, &mining.workflow, cfg))
}

/// Remaining share of the period still open at the end of `seq`.
pub fn track(seq: &FeatureSequence, mining: &MiningResult, cfg: &StreamConfig) -> Result<CompletionEstimate> {
    let state = replay(seq, mining, cfg)?;
    Ok(CompletionEstimate { remaining: remaining_from(&state, &mining.workflow)? })
}

/// Longest sustained deviation of `seq` from the mined workflow.
pub fn detect_anomaly(seq: &FeatureSequence, mining: &MiningResult, cfg: &StreamConfig) -> Result<AnomalyReport> {
    Ok(anomaly_of(&replay(seq, mining, cfg)?, cfg))
}

fn open_remaining(state: &StreamState, mining: &MiningResult) -> Result<Option<f64>> {
    match remaining_from(state, &mining.workflow) {
        Ok(z) => Ok(Some(z)),
        Err(Error::NoOpenPeriod) => Ok(None),
        Err(e) => Err(e),
    }
}

fn anomaly_of(state: &StreamState, cfg: &StreamConfig) -> AnomalyReport {
    let interval = longest_deviation(&state.deviations, cfg)
        .map(|(s, e)| Interval::frames(s, e).expect("deviation has frames"));
    AnomalyReport { interval }
}

impl Analysis {
    pub fn prediction(&self, id: impl Into<String>) -> Prediction {
        Prediction {
            id: id.into(),
            boundaries: self.periods.boundaries.clone(),
            remaining: self.remaining,
            anomaly: self.anomaly,
        }
    }
}
