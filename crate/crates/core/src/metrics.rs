//! Benchmark metrics: count MAPE, Hungarian-matched period tIoU, completion
//! MAE and anomaly tIoU, plus per-batch aggregation.

use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{GroundTruth, Interval, PeriodSegmentation, Task};

fn same_len<A, B>(a: &[A], b: &[B]) -> Result<()> {
    if a.len() != b.len() {
        return Err(Error::LengthMismatch(a.len(), b.len()));
    }
    Ok(())
}

fn mean(xs: impl Iterator<Item = f64>) -> f64 {
    let (sum, n) = xs.fold((0.0, 0usize), |(s, n), x| (s + x, n + 1));
    if n == 0 {
        0.0
    } else {
        sum / n as f64
    }
}

/// Mean absolute percentage error of period counts. Every GT count must be
/// at least 3.
pub fn mape(preds: &[usize], gts: &[usize]) -> Result<f64> {
    same_len(preds, gts)?;
    if let Some(&bad) = gts.iter().find(|&&g| g < 3) {
        return Err(Error::InvalidGroundTruth(bad));
    }
    Ok(mean(preds.iter().zip(gts).map(|(&p, &g)| (p as f64 - g as f64).abs() / g as f64)))
}

/// Temporal IoU of two intervals.
pub fn tiou_interval(a: &Interval, b: &Interval) -> f64 {
    let inter = (a.end().min(b.end()) - a.start().max(b.start())).max(0.0);
    let hull = a.end().max(b.end()) - a.start().min(b.start());
    inter / hull
}

/// Maximum-total-score one-to-one assignment covering `min(R, C)` pairs.
/// Returns `(row, col)` pairs sorted by row.
pub fn hungarian(scores: &[Vec<f64>]) -> Vec<(usize, usize)> {
    let rows = scores.len();
    let cols = scores.first().map_or(0, Vec::len);
    if rows == 0 || cols == 0 {
        return Vec::new();
    }
    let transposed = rows > cols;
    let (n, m) = if transposed { (cols, rows) } else { (rows, cols) };
    let cost = |i: usize, j: usize| -> f64 {
        if transposed {
            -scores[j][i]
        } else {
            -scores[i][j]
        }
    };
    // potentials formulation, 1-based with a virtual column 0
    let mut u = vec![0.0; n + 1];
    let mut v = vec![0.0; m + 1];
    let mut p = vec![0usize; m + 1];
    let mut way = vec![0usize; m + 1];
    for i in 1..=n {
        p[0] = i;
        let mut j0 = 0;
        let mut minv = vec![f64::INFINITY; m + 1];
        let mut used = vec![false; m + 1];
        loop {
            used[j0] = true;
            let i0 = p[j0];
            let mut delta = f64::INFINITY;
            let mut j1 = 0;
            for j in 1..=m {
                if !used[j] {
                    let cur = cost(i0 - 1, j - 1) - u[i0] - v[j];
                    if cur < minv[j] {
                        minv[j] = cur;
                        way[j] = j0;
                    }
                    if minv[j] < delta {
                        delta = minv[j];
                        j1 = j;
                    }
                }
            }
            for j in 0..=m {
                if used[j] {
                    u[p[j]] += delta;
                    v[j] -= delta;
                } else {
                    minv[j] -= delta;
                }
            }
            j0 = j1;
            if p[j0] == 0 {
                break;
            }
        }
        loop {
            let j1 = way[j0];
            p[j0] = p[j1];
            j0 = j1;
            if j0 == 0 {
                break;
            }
        }
    }
    let mut pairs: Vec<(usize, usize)> = (1..=m)
        .filter(|&j| p[j] != 0)
        .map(|j| if transposed { (j - 1, p[j] - 1) } else { (p[j] - 1, j - 1) })
        .collect();
    pairs.sort_unstable();
    pairs
}

/// Hungarian-matched tIoU of one sequence, normalized by the GT count.
/// Unmatched GT periods contribute 0; an empty prediction scores 0.
pub fn tiou_period_single(pred: &[Interval], gt: &[Interval]) -> f64 {
    if pred.is_empty() || gt.is_empty() {
        return 0.0;
    }
    let matrix: Vec<Vec<f64>> =
        pred.iter().map(|p| gt.iter().map(|g| tiou_interval(p, g)).collect()).collect();
    let total: f64 = hungarian(&matrix).iter().map(|&(i, j)| matrix[i][j]).sum();
    total / gt.len() as f64
}

pub fn tiou_period(preds: &[PeriodSegmentation], gts: &[PeriodSegmentation]) -> Result<f64> {
    same_len(preds, gts)?;
    if let Some(bad) = gts.iter().find(|g| g.count() < 3) {
        return Err(Error::InvalidGroundTruth(bad.count()));
    }
    Ok(mean(preds.iter().zip(gts).map(|(p, g)| tiou_period_single(&p.boundaries, &g.boundaries))))
}

/// Mean absolute error of remaining-phase proportions.
pub fn mae(preds: &[f64], gts: &[f64]) -> Result<f64> {
    same_len(preds, gts)?;
    if let Some(&bad) = preds.iter().chain(gts).find(|x| !(0.0..=1.0).contains(*x)) {
        return Err(Error::OutOfRange(bad));
    }
    Ok(mean(preds.iter().zip(gts).map(|(p, g)| (p - g).abs())))
}

/// Mean anomaly tIoU; a missing prediction scores 0.
pub fn tiou_anomaly(preds: &[Option<Interval>], gts: &[Interval]) -> Result<f64> {
    same_len(preds, gts)?;
    Ok(mean(preds.iter().zip(gts).map(|(p, g)| p.as_ref().map_or(0.0, |p| tiou_interval(p, g)))))
}

/// What a method reports for one sequence.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Prediction {
    pub id: String,
    pub boundaries: Vec<Interval>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub remaining: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub anomaly: Option<Interval>,
}

impl Prediction {
    pub fn count(&self) -> usize {
        self.boundaries.len()
    }
}

/// Per-sequence terms; a field is `None` when the sequence's task does not
/// exercise that metric.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SequenceScores {
    pub id: String,
    pub task: Task,
    pub ape: Option<f64>,
    pub tiou_period: Option<f64>,
    pub abs_error: Option<f64>,
    pub tiou_anomaly: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub mape: Option<f64>,
    pub tiou_period: Option<f64>,
    pub mae: Option<f64>,
    pub tiou_anomaly: Option<f64>,
    pub per_sequence: Vec<SequenceScores>,
}

/// Scores one prediction against its ground truth.
///
/// Period instances feed MAPE and period tIoU, completion instances MAE,
/// anomaly instances anomaly tIoU. A missing remaining-phase estimate counts
/// as the maximal error of 1.
pub fn score_sequence(pred: &Prediction, gt: &GroundTruth) -> Result<SequenceScores> {
    let mut out = SequenceScores {
        id: gt.id.clone(),
        task: gt.task,
        ape: None,
        tiou_period: None,
        abs_error: None,
        tiou_anomaly: None,
    };
    match gt.task {
        Task::Period => {
            out.ape = Some(mape(&[pred.count()], &[gt.boundaries.len()])?);
            out.tiou_period = Some(tiou_period_single(&pred.boundaries, &gt.boundaries));
        }
        Task::Completion => {
            let z = gt.remaining.ok_or(Error::InvalidGroundTruth(0))?;
            out.abs_error = Some(match pred.remaining {
                Some(r) => mae(&[r], &[z])?,
                None => 1.0,
            });
        }
        Task::Anomaly => {
            let g = gt.anomaly.ok_or(Error::InvalidGroundTruth(0))?;
            out.tiou_anomaly = Some(tiou_anomaly(&[pred.anomaly], &[g])?);
        }
    }
    Ok(out)
}

impl EvalReport {
    /// Aggregates are plain means of the present per-sequence terms.
    pub fn from_scores(per_sequence: Vec<SequenceScores>) -> Self {
        let agg = |f: fn(&SequenceScores) -> Option<f64>| {
            let xs: Vec<f64> = per_sequence.iter().filter_map(f).collect();
            if xs.is_empty() {
                None
            } else {
                Some(mean(xs.into_iter()))
            }
        };
        EvalReport {
            mape: agg(|s| s.ape),
            tiou_period: agg(|s| s.tiou_period),
            mae: agg(|s| s.abs_error),
            tiou_anomaly: agg(|s| s.tiou_anomaly),
            per_sequence,
        }
    }
}

/// Scores matched (prediction, ground truth) pairs.
pub fn evaluate(pairs: &[(Prediction, GroundTruth)]) -> Result<EvalReport> {
    let scores = pairs.iter().map(|(p, g)| score_sequence(p, g)).collect::<Result<Vec<_>>>()?;
    Ok(EvalReport::from_scores(scores))
}
