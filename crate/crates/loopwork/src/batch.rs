//! Per-sequence fan-out over a worker pool; results keep input order.

use loopwork_core::datagen::Generated;
use loopwork_core::metrics::{evaluate, EvalReport, Prediction};
use loopwork_core::miner::MiningResult;
use loopwork_core::model::PeriodSegmentation;
use loopwork_core::{analyze, Config, FeatureSequence, GroundTruth};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::CliError;

/// What `mine` writes: the mining result plus the stream-refined periods.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MinedDocument {
    pub id: String,
    pub count: usize,
    pub workflow: String,
    pub periods: PeriodSegmentation,
    pub result: MiningResult,
}

/// Prediction for one sequence. A sequence the pipeline cannot handle gets
/// an empty prediction, which scores as a miss on every metric.
pub fn predict(seq: &FeatureSequence, cfg: &Config) -> (Prediction, Option<String>) {
    match analyze(seq, cfg) {
        Ok(a) => (a.prediction(seq.id()), None),
        Err(e) => (
            Prediction { id: seq.id().to_string(), boundaries: Vec::new(), remaining: None, anomaly: None },
            Some(format!("{}: {e}", seq.id())),
        ),
    }
}

pub fn predict_all(seqs: &[FeatureSequence], cfg: &Config) -> Vec<(Prediction, Option<String>)> {
    seqs.par_iter().map(|s| predict(s, cfg)).collect()
}

/// Runs the pipeline on generated instances and scores it against their
/// ground truth.
pub fn evaluate_generated(items: &[Generated], cfg: &Config) -> Result<EvalReport, CliError> {
    let pairs: Vec<(Prediction, GroundTruth)> = items
        .par_iter()
        .map(|g| (predict(&g.sequence, cfg).0, g.truth.clone()))
        .collect();
    Ok(evaluate(&pairs)?)
}

/// Pairs predictions with ground truth by id. Every id must appear on both
/// sides.
pub fn match_by_id(preds: Vec<Prediction>, truths: Vec<GroundTruth>) -> Result<Vec<(Prediction, GroundTruth)>, CliError> {
    let mut missing: Vec<String> = truths
        .iter()
        .filter(|g| !preds.iter().any(|p| p.id == g.id))
        .map(|g| format!("no prediction for {}", g.id))
        .collect();
    missing.extend(
        preds
            .iter()
            .filter(|p| !truths.iter().any(|g| g.id == p.id))
            .map(|p| format!("no ground truth for {}", p.id)),
    );
    if !missing.is_empty() {
        return Err(CliError::data(missing.join("\n")));
    }
    Ok(truths
        .into_iter()
        .map(|g| {
            let p = preds.iter().find(|p| p.id == g.id).expect("checked above").clone();
            (p, g)
        })
        .collect())
}
