//! Workflow mining: buffered segmentation, alignment, trimming and
//! multi-branch workflow construction.
//!
//! Alignment runs on run-length compressed token strings. Every aligned
//! token keeps the frame run it came from, so trimmed columns map back to
//! frame-accurate period boundaries and slot durations.

use alloc::vec;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{
    Codebook, FeatureSequence, HardTranscript, Interval, PeriodSegmentation, Slot, Token, TokenRun,
    TokenRunSequence, Workflow,
};
use crate::mta::{align, consensus, AlignConfig, Alignment, Cell};
use crate::period::{estimate_period_window, estimate_period_window_hard, PeriodConfig, WindowToken};
use crate::tokenizer::{absorb_short_runs, auto_k, fit_codebook, hard_tokenize, normalize, rle_compress, soft_tokenize, AUTO_K_RANGE};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MinerConfig {
    /// Fraction of `w` added on both sides of each nominal segment.
    pub buffer: f64,
    /// Runs shorter than this are folded into a neighbor before alignment.
    pub min_run_frames: usize,
    /// Interior columns whose non-gap share is below this are dropped from
    /// the workflow (edge columns are always trimmed at one half).
    pub min_slot_support: f64,
    /// A token becomes a branch alternative only if it fills at least this
    /// share of the column's non-gap cells.
    pub min_branch_share: f64,
    /// A slot becomes skippable only if at least this share of rows are gaps.
    pub min_skip_share: f64,
    pub align: AlignConfig,
}

impl Default for MinerConfig {
    fn default() -> Self {
        MinerConfig {
            buffer: 0.2,
            min_run_frames: 2,
            min_slot_support: 0.5,
            min_branch_share: 0.25,
            min_skip_share: 0.25,
            align: AlignConfig::default(),
        }
    }
}

/// One buffered segment of the run sequence.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Segment {
    /// Un-buffered frame span `[i*w, (i+1)*w)`.
    pub nominal: (usize, usize),
    /// Buffered span actually covered, clipped to `[0, T)`.
    pub range: (usize, usize),
    /// Runs overlapping `range`, unclipped.
    pub runs: Vec<TokenRun>,
}

impl Segment {
    pub fn tokens(&self) -> Vec<Token> {
        self.runs.iter().map(|r| r.token).collect()
    }
}

/// Cuts the run sequence into window-sized segments widened by `buffer * w`
/// on each side. A trailing nominal span shorter than `w / 2` is merged into
/// its predecessor.
pub fn segment_transcript(runs: &TokenRunSequence, w: usize, buffer: f64) -> Result<Vec<Segment>> {
    if !(0.0..0.5).contains(&buffer) {
        return Err(Error::InvalidBuffer(buffer));
    }
    let total = runs.total_len();
    if w < 2 || total < 2 * w {
        return Err(Error::WindowTooLarge { window: w, frames: total });
    }
    let mut nominal: Vec<(usize, usize)> = (0..total.div_ceil(w))
        .map(|i| (i * w, ((i + 1) * w).min(total)))
        .collect();
    if let Some(&(s, e)) = nominal.last() {
        if (e - s) * 2 < w {
            nominal.pop();
            nominal.last_mut().expect("at least two nominal spans").1 = total;
        }
    }
    let pad = libm::round(buffer * w as f64) as usize;
    Ok(nominal
        .into_iter()
        .map(|(s, e)| {
            let range = (s.saturating_sub(pad), (e + pad).min(total));
            let covered = runs
                .runs
                .iter()
                .filter(|r| r.start < range.1 && r.end() > range.0)
                .copied()
                .collect();
            Segment { nominal: (s, e), range, runs: covered }
        })
        .collect())
}

/// An alignment whose non-gap cells remember their source runs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AnchoredAlignment {
    pub alignment: Alignment,
    pub anchors: Vec<Vec<Option<TokenRun>>>,
}

impl AnchoredAlignment {
    /// Pairs every non-gap cell of row `i` with `segments[i].runs` in order.
    pub fn new(alignment: Alignment, segments: &[Segment]) -> Self {
        let anchors = alignment
            .rows
            .iter()
            .zip(segments)
            .map(|(row, seg)| {
                let mut next = seg.runs.iter();
                row.iter().map(|c| c.map(|_| *next.next().expect("row matches its segment"))).collect()
            })
            .collect();
        AnchoredAlignment { alignment, anchors }
    }

    pub fn width(&self) -> usize {
        self.alignment.width()
    }

    fn keep_columns(&mut self, keep: impl Fn(usize) -> bool) {
        let width = self.width();
        let cols: Vec<usize> = (0..width).filter(|&c| keep(c)).collect();
        for row in &mut self.alignment.rows {
            *row = cols.iter().map(|&c| row[c]).collect();
        }
        for row in &mut self.anchors {
            *row = cols.iter().map(|&c| row[c]).collect();
        }
        self.alignment.score = self.alignment.column_score();
    }

    fn gap_share(&self, c: usize) -> f64 {
        let rows = self.alignment.rows.len();
        let gaps = self.alignment.rows.iter().filter(|r| r[c].is_none()).count();
        gaps as f64 / rows as f64
    }
}

/// Removes buffer spill around the shared period.
///
/// 1. Leading and trailing columns in which more than half the rows are gaps
///    go.
/// 2. The first segment starts at the sequence start, so the first token of
///    row 0 is taken as the start token. Columns before the first column
///    whose consensus is that token are spill from the previous period.
/// 3. Walking forward, the next column whose consensus is the start token
///    again (with some other token seen in between) opens the next period;
///    it and everything after it go.
pub fn trim_alignment(mut al: AnchoredAlignment) -> Result<AnchoredAlignment> {
    let width = al.width();
    if width == 0 {
        return Err(Error::DegenerateAlignment);
    }
    let mut lo = 0;
    while lo < width && al.gap_share(lo) > 0.5 {
        lo += 1;
    }
    let mut hi = width;
    while hi > lo && al.gap_share(hi - 1) > 0.5 {
        hi -= 1;
    }
    if lo == hi {
        return Err(Error::DegenerateAlignment);
    }
    // columns that are mostly gaps carry no consensus
    let cons: Vec<Option<Token>> = consensus(&al.alignment.rows)
        .into_iter()
        .enumerate()
        .map(|(c, t)| t.filter(|_| al.gap_share(c) <= 0.5))
        .collect();
    let first = al.alignment.rows[0].iter().position(Option::is_some);
    let start = first.and_then(|c| al.alignment.rows[0][c]);
    lo = (lo..hi)
        .find(|&c| cons[c] == start)
        .or_else(|| first.map(|c| c.clamp(lo, hi - 1)))
        .unwrap_or(lo);
    let start = cons[lo];
    let mut other_seen = false;
    for c in lo + 1..hi {
        if cons[c] == start && other_seen {
            hi = c;
            break;
        }
        if cons[c].is_some() && cons[c] != start {
            other_seen = true;
        }
    }
    al.keep_columns(|c| c >= lo && c < hi);
    Ok(al)
}

/// Drops interior columns whose non-gap share is below `min_support`.
pub fn prune_sparse_columns(mut al: AnchoredAlignment, min_support: f64) -> Result<AnchoredAlignment> {
    let keep: Vec<bool> = (0..al.width()).map(|c| 1.0 - al.gap_share(c) >= min_support).collect();
    if !keep.iter().any(|&k| k) {
        return Err(Error::DegenerateAlignment);
    }
    al.keep_columns(|c| keep[c]);
    Ok(al)
}

/// One slot per column: the non-gap tokens become alternatives, any gap
/// makes the slot skippable, and durations come from the anchored runs.
pub fn build_workflow(al: &AnchoredAlignment) -> Result<Workflow> {
    build_workflow_with(al, 0.0, 0.0)
}

/// [`build_workflow`] ignoring alternatives and gaps that are too rare to be
/// more than tokenization noise.
pub fn build_workflow_with(al: &AnchoredAlignment, min_branch_share: f64, min_skip_share: f64) -> Result<Workflow> {
    let width = al.width();
    if width == 0 {
        return Err(Error::DegenerateAlignment);
    }
    let rows = al.alignment.rows.len() as f64;
    let mut slots = Vec::with_capacity(width);
    for c in 0..width {
        let column: Vec<Cell> = al.alignment.column(c);
        let filled: Vec<Token> = column.iter().flatten().copied().collect();
        if filled.is_empty() {
            return Err(Error::DegenerateAlignment);
        }
        let share = |t: Token| filled.iter().filter(|&&x| x == t).count() as f64 / filled.len() as f64;
        let mut alternatives: Vec<Token> = filled.iter().copied().filter(|&t| share(t) >= min_branch_share).collect();
        alternatives.sort_unstable();
        alternatives.dedup();
        if alternatives.is_empty() {
            alternatives.push(majority(&column).expect("column has tokens"));
        }
        let lens: Vec<f64> = al
            .anchors
            .iter()
            .filter_map(|r| r[c])
            .filter(|r| alternatives.binary_search(&r.token).is_ok())
            .map(|r| r.len as f64)
            .collect();
        let mean = lens.iter().sum::<f64>() / lens.len() as f64;
        let var = lens.iter().map(|l| (l - mean) * (l - mean)).sum::<f64>() / lens.len() as f64;
        let gaps = column.iter().filter(|c| c.is_none()).count() as f64;
        slots.push(Slot {
            alternatives,
            skippable: gaps > 0.0 && gaps / rows >= min_skip_share,
            mean_duration: mean.max(1.0),
            duration_var: var,
        });
    }
    let first = slots.iter().position(|s| !s.skippable).unwrap_or(0);
    let start_symbol = majority(&al.alignment.column(first)).ok_or(Error::DegenerateAlignment)?;
    Workflow::new(slots, start_symbol)
}

fn majority(column: &[Cell]) -> Option<Token> {
    consensus(&column.iter().map(|&c| vec![c]).collect::<Vec<_>>()).into_iter().next().flatten()
}

/// Period boundaries from the first and last retained run of each row,
/// clipped to the row's segment and made non-overlapping.
pub fn anchored_segmentation(al: &AnchoredAlignment, segments: &[Segment]) -> PeriodSegmentation {
    let mut out: Vec<Interval> = Vec::new();
    for (row, seg) in al.anchors.iter().zip(segments) {
        let mut runs = row.iter().flatten();
        let Some(first) = runs.next() else { continue };
        let last = runs.last().unwrap_or(first);
        let mut start = first.start.max(seg.range.0);
        let end = last.end().min(seg.range.1);
        if let Some(prev) = out.last() {
            start = start.max(prev.end() as usize);
        }
        if let Ok(iv) = Interval::frames(start, end) {
            out.push(iv);
        }
    }
    PeriodSegmentation { boundaries: out }
}

/// How the alphabet size is chosen.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum KChoice {
    Fixed(usize),
    /// Inertia elbow within the given inclusive range.
    Auto { lo: usize, hi: usize },
}

impl Default for KChoice {
    fn default() -> Self {
        KChoice::Auto { lo: AUTO_K_RANGE.0, hi: AUTO_K_RANGE.1 }
    }
}

/// Everything produced by mining one sequence.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MiningResult {
    pub codebook: Codebook,
    pub workflow: Workflow,
    pub segmentation: PeriodSegmentation,
    pub window: usize,
    pub transcript: HardTranscript,
    pub alignment: Alignment,
}

/// Tokenizes `seq` and fits the codebook according to `k`.
pub fn tokenize(seq: &FeatureSequence, k: KChoice, seed: u64) -> Result<Codebook> {
    let k = match k {
        KChoice::Fixed(k) => k,
        KChoice::Auto { lo, hi } => auto_k(seq, lo, hi, seed)?,
    };
    fit_codebook(seq, k, seed)
}

/// Full mining pipeline for one sequence.
pub fn mine(
    seq: &FeatureSequence,
    k: KChoice,
    normalize_features: bool,
    seed: u64,
    period: &PeriodConfig,
    miner: &MinerConfig,
) -> Result<MiningResult> {
    let normalized;
    let seq = if normalize_features {
        normalized = normalize(seq);
        &normalized
    } else {
        seq
    };
    if seq.len() < 3 * period.min_window.max(1) {
        return Err(Error::SequenceTooShort(seq.len()));
    }
    let codebook = tokenize(seq, k, seed)?;
    let hard = hard_tokenize(seq, &codebook)?;
    let window = match period.window_token {
        WindowToken::Soft => estimate_period_window(&soft_tokenize(seq, &codebook)?, period)?,
        WindowToken::Hard => estimate_period_window_hard(&hard, codebook.k(), period)?,
    };
    mine_tokens(codebook, hard, window, miner)
}

/// Mining from an existing transcript and window.
pub fn mine_tokens(codebook: Codebook, hard: HardTranscript, window: usize, miner: &MinerConfig) -> Result<MiningResult> {
    let runs = absorb_short_runs(&rle_compress(&hard), miner.min_run_frames);
    let segments = segment_transcript(&runs, window, miner.buffer)?;
    let strings: Vec<Vec<Token>> = segments.iter().map(Segment::tokens).collect();
    let alignment = align(&strings, &miner.align)?;
    let anchored = trim_alignment(AnchoredAlignment::new(alignment, &segments))?;
    let anchored = prune_sparse_columns(anchored, miner.min_slot_support)?;
    let workflow = build_workflow_with(&anchored, miner.min_branch_share, miner.min_skip_share)?;
    let segmentation = anchored_segmentation(&anchored, &segments);
    Ok(MiningResult {
        codebook,
        workflow,
        segmentation,
        window,
        transcript: hard,
        alignment: anchored.alignment,
    })
}
