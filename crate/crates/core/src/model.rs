//! Domain types shared by every stage of the pipeline.
//!
//! Time is always a frame index inside the core; `frame_rate` is only
//! consulted when results are reported in seconds.

use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;
use core::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// An activity token: the index of a codebook centroid.
///
/// Displayed as `A`, `B`, …, `Z`, then `A1`, `B1`, … past the 26th symbol.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Token(pub u32);

impl Token {
    pub fn index(self) -> usize {
        self.0 as usize
    }

    /// Parses the display form produced by `Display`.
    pub fn parse(s: &str) -> Result<Token> {
        let mut chars = s.chars();
        let letter = chars.next().ok_or_else(|| Error::BadToken(String::from(s)))?;
        if !letter.is_ascii_uppercase() {
            return Err(Error::BadToken(String::from(s)));
        }
        let rest = chars.as_str();
        let cycle: u32 = if rest.is_empty() {
            0
        } else {
            match rest.parse::<u32>() {
                Ok(c) if c > 0 => c,
                _ => return Err(Error::BadToken(String::from(s))),
            }
        };
        Ok(Token(cycle * 26 + (letter as u32 - 'A' as u32)))
    }
}

impl fmt::Display for Token {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let letter = (b'A' + (self.0 % 26) as u8) as char;
        let cycle = self.0 / 26;
        if cycle == 0 {
            write!(f, "{letter}")
        } else {
            write!(f, "{letter}{cycle}")
        }
    }
}

/// Renders a token string in the display alphabet, space separated.
pub fn display_tokens(tokens: &[Token]) -> String {
    let parts: Vec<String> = tokens.iter().map(|t| format!("{t}")).collect();
    parts.join(" ")
}

/// A length-T series of n-dimensional feature vectors.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawSequence", into = "RawSequence")]
pub struct FeatureSequence {
    frames: Vec<Vec<f64>>,
    frame_rate: f64,
    id: String,
}

#[derive(Serialize, Deserialize)]
struct RawSequence {
    id: String,
    #[serde(default = "default_frame_rate")]
    frame_rate: f64,
    frames: Vec<Vec<f64>>,
}

fn default_frame_rate() -> f64 {
    1.0
}

impl TryFrom<RawSequence> for FeatureSequence {
    type Error = Error;

    fn try_from(raw: RawSequence) -> Result<Self> {
        FeatureSequence::new(raw.id, raw.frames, raw.frame_rate)
    }
}

impl From<FeatureSequence> for RawSequence {
    fn from(seq: FeatureSequence) -> Self {
        RawSequence { id: seq.id, frame_rate: seq.frame_rate, frames: seq.frames }
    }
}

impl FeatureSequence {
    /// Builds a sequence, rejecting ragged, empty or non-finite input.
    pub fn new(id: impl Into<String>, frames: Vec<Vec<f64>>, frame_rate: f64) -> Result<Self> {
        if !(frame_rate.is_finite() && frame_rate > 0.0) {
            return Err(Error::NonFiniteValue { frame: 0, component: 0 });
        }
        validate_sequence(FeatureSequence { frames, frame_rate, id: id.into() })
    }

    pub fn frames(&self) -> &[Vec<f64>] {
        &self.frames
    }

    pub fn len(&self) -> usize {
        self.frames.len()
    }

    pub fn is_empty(&self) -> bool {
        self.frames.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.frames[0].len()
    }

    pub fn frame_rate(&self) -> f64 {
        self.frame_rate
    }

    pub fn id(&self) -> &str {
        &self.id
    }

    pub fn into_frames(self) -> Vec<Vec<f64>> {
        self.frames
    }
}

/// Checks every [`FeatureSequence`] invariant and hands the input back untouched.
pub fn validate_sequence(seq: FeatureSequence) -> Result<FeatureSequence> {
    let first = seq.frames.first().ok_or(Error::EmptySequence)?;
    let n = first.len();
    if n == 0 {
        return Err(Error::DimensionMismatch { expected: 1, found: 0 });
    }
    for (t, frame) in seq.frames.iter().enumerate() {
        if frame.len() != n {
            return Err(Error::DimensionMismatch { expected: n, found: frame.len() });
        }
        if let Some(c) = frame.iter().position(|x| !x.is_finite()) {
            return Err(Error::NonFiniteValue { frame: t, component: c });
        }
    }
    Ok(seq)
}

/// K centroids over feature space; defines the token alphabet.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawCodebook", into = "RawCodebook")]
pub struct Codebook {
    centroids: Vec<Vec<f64>>,
}

#[derive(Serialize, Deserialize)]
struct RawCodebook {
    centroids: Vec<Vec<f64>>,
}

impl TryFrom<RawCodebook> for Codebook {
    type Error = Error;

    fn try_from(raw: RawCodebook) -> Result<Self> {
        Codebook::new(raw.centroids)
    }
}

impl From<Codebook> for RawCodebook {
    fn from(cb: Codebook) -> Self {
        RawCodebook { centroids: cb.centroids }
    }
}

impl Codebook {
    pub fn new(centroids: Vec<Vec<f64>>) -> Result<Self> {
        if centroids.len() < 2 {
            return Err(Error::InvalidCodebook("need at least two centroids"));
        }
        let n = centroids[0].len();
        if n == 0 || centroids.iter().any(|c| c.len() != n) {
            return Err(Error::InvalidCodebook("ragged centroids"));
        }
        if centroids.iter().flatten().any(|x| !x.is_finite()) {
            return Err(Error::InvalidCodebook("non-finite centroid"));
        }
        Ok(Codebook { centroids })
    }

    pub fn k(&self) -> usize {
        self.centroids.len()
    }

    pub fn dim(&self) -> usize {
        self.centroids[0].len()
    }

    pub fn centroids(&self) -> &[Vec<f64>] {
        &self.centroids
    }
}

/// One symbol per frame.
#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct HardTranscript {
    pub tokens: Vec<Token>,
}

impl HardTranscript {
    pub fn new(tokens: Vec<Token>) -> Self {
        HardTranscript { tokens }
    }

    pub fn len(&self) -> usize {
        self.tokens.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tokens.is_empty()
    }
}

/// One probability vector over the K tokens per frame.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SoftTranscript {
    pub rows: Vec<Vec<f64>>,
}

impl SoftTranscript {
    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    pub fn k(&self) -> usize {
        self.rows.first().map_or(0, Vec::len)
    }

    /// One-hot rows for a hard transcript over `k` symbols.
    pub fn one_hot(hard: &HardTranscript, k: usize) -> Self {
        let rows = hard
            .tokens
            .iter()
            .map(|t| {
                let mut row = alloc::vec![0.0; k];
                row[t.index()] = 1.0;
                row
            })
            .collect();
        SoftTranscript { rows }
    }
}

/// A maximal run of one token, anchored at its first frame.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct TokenRun {
    pub token: Token,
    pub start: usize,
    pub len: usize,
}

impl TokenRun {
    pub fn end(&self) -> usize {
        self.start + self.len
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct TokenRunSequence {
    pub runs: Vec<TokenRun>,
}

impl TokenRunSequence {
    pub fn total_len(&self) -> usize {
        self.runs.last().map_or(0, TokenRun::end)
    }

    /// Inverse of run-length compression.
    pub fn expand(&self) -> HardTranscript {
        let mut tokens = Vec::with_capacity(self.total_len());
        for run in &self.runs {
            tokens.extend(core::iter::repeat_n(run.token, run.len));
        }
        HardTranscript { tokens }
    }
}

/// Half-open time span `[start, end)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "(f64, f64)", into = "(f64, f64)")]
pub struct Interval {
    start: f64,
    end: f64,
}

impl TryFrom<(f64, f64)> for Interval {
    type Error = Error;

    fn try_from((start, end): (f64, f64)) -> Result<Self> {
        Interval::new(start, end)
    }
}

impl From<Interval> for (f64, f64) {
    fn from(iv: Interval) -> Self {
        (iv.start, iv.end)
    }
}

impl Interval {
    pub fn new(start: f64, end: f64) -> Result<Self> {
        if !(start.is_finite() && end.is_finite() && start < end) {
            return Err(Error::InvalidInterval { start, end });
        }
        Ok(Interval { start, end })
    }

    /// Frame-index interval; `start < end` is still enforced.
    pub fn frames(start: usize, end: usize) -> Result<Self> {
        Interval::new(start as f64, end as f64)
    }

    pub fn start(&self) -> f64 {
        self.start
    }

    pub fn end(&self) -> f64 {
        self.end
    }

    pub fn length(&self) -> f64 {
        self.end - self.start
    }

    pub fn contains(&self, other: &Interval) -> bool {
        self.start <= other.start && other.end <= self.end
    }

    /// Same interval expressed in seconds.
    pub fn to_seconds(&self, frame_rate: f64) -> Interval {
        Interval { start: self.start / frame_rate, end: self.end / frame_rate }
    }
}

/// One workflow position: alternative tokens plus timing.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Slot {
    /// Sorted, deduplicated, nonempty.
    pub alternatives: Vec<Token>,
    pub skippable: bool,
    pub mean_duration: f64,
    #[serde(default)]
    pub duration_var: f64,
}

impl Slot {
    pub fn accepts(&self, token: Token) -> bool {
        self.alternatives.binary_search(&token).is_ok()
    }
}

impl fmt::Display for Slot {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.skippable {
            f.write_str("_")?;
        }
        if self.alternatives.len() == 1 {
            write!(f, "{}", self.alternatives[0])
        } else {
            f.write_str("[")?;
            for (i, t) in self.alternatives.iter().enumerate() {
                if i > 0 {
                    f.write_str("|")?;
                }
                write!(f, "{t}")?;
            }
            f.write_str("]")
        }
    }
}

/// Ordered multi-branch template shared by every period of a sequence.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Workflow {
    pub slots: Vec<Slot>,
    pub start_symbol: Token,
}

impl Workflow {
    /// Builds a workflow and derives the start symbol from the first
    /// non-skippable slot (first slot when every slot is skippable).
    pub fn new(slots: Vec<Slot>, start_symbol: Token) -> Result<Self> {
        if slots.is_empty() || slots.iter().any(|s| s.alternatives.is_empty()) {
            return Err(Error::DegenerateAlignment);
        }
        Ok(Workflow { slots, start_symbol })
    }

    /// Unbranched, gap-free workflow with unit durations, mostly for tests.
    pub fn linear(tokens: &[Token], durations: &[f64]) -> Self {
        let slots = tokens
            .iter()
            .zip(durations)
            .map(|(&t, &d)| Slot {
                alternatives: alloc::vec![t],
                skippable: false,
                mean_duration: d,
                duration_var: 0.0,
            })
            .collect();
        Workflow { slots, start_symbol: tokens[0] }
    }

    pub fn len(&self) -> usize {
        self.slots.len()
    }

    pub fn is_empty(&self) -> bool {
        self.slots.is_empty()
    }

    pub fn total_duration(&self) -> f64 {
        self.slots.iter().map(|s| s.mean_duration).sum()
    }

    pub fn check_alphabet(&self, k: usize) -> Result<()> {
        for t in self.slots.iter().flat_map(|s| &s.alternatives) {
            if t.index() >= k {
                return Err(Error::TokenOutOfRange { token: t.0, k });
            }
        }
        Ok(())
    }
}

impl fmt::Display for Workflow {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (i, slot) in self.slots.iter().enumerate() {
            if i > 0 {
                f.write_str(" ")?;
            }
            write!(f, "{slot}")?;
        }
        Ok(())
    }
}

/// Detected period boundaries in frame units.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct PeriodSegmentation {
    pub boundaries: Vec<Interval>,
}

impl PeriodSegmentation {
    /// Rejects unsorted or overlapping intervals.
    pub fn new(boundaries: Vec<Interval>) -> Result<Self> {
        for pair in boundaries.windows(2) {
            if pair[1].start() < pair[0].end() {
                return Err(Error::InvalidInterval { start: pair[1].start(), end: pair[0].end() });
            }
        }
        Ok(PeriodSegmentation { boundaries })
    }

    pub fn count(&self) -> usize {
        self.boundaries.len()
    }
}

/// Which benchmark task an instance was built for.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Task {
    Period,
    Completion,
    Anomaly,
}

/// Reference annotation for one sequence.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroundTruth {
    pub id: String,
    pub task: Task,
    pub boundaries: Vec<Interval>,
    /// Workflow in display form, e.g. `A [B|D] _C`.
    pub workflow: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub anomaly: Option<Interval>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub remaining: Option<f64>,
}

impl GroundTruth {
    /// Number of completed periods (excludes a truncated open period).
    pub fn complete_count(&self) -> usize {
        match self.task {
            Task::Completion => self.boundaries.len().saturating_sub(1),
            _ => self.boundaries.len(),
        }
    }

    /// True when `boundaries` tile `[0, len)` with no gaps or overlaps.
    pub fn partitions(&self, len: usize) -> bool {
        let mut cursor = 0.0;
        for iv in &self.boundaries {
            if iv.start() != cursor {
                return false;
            }
            cursor = iv.end();
        }
        cursor == len as f64
    }
}
