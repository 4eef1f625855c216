//! Online inference against a mined workflow.
//!
//! Two pointers advance together: one over the incoming token stream, one
//! over the workflow slots. The workflow pointer starts past the end, so the
//! first start token opens a period; afterwards a start token seen while the
//! workflow can be complete closes the running period and opens the next.
//! Tokens that no reachable slot accepts are deviations, which is what
//! anomaly localization reports.

use alloc::vec;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{HardTranscript, Interval, PeriodSegmentation, Token, Workflow};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StreamConfig {
    /// A start token also closes a period whose pointer has not reached the
    /// end once the period has run this fraction of the expected duration.
    pub resync_ratio: f64,
    pub min_anomaly_frames: usize,
    pub merge_gap: usize,
}

impl Default for StreamConfig {
    fn default() -> Self {
        StreamConfig { resync_ratio: 0.8, min_anomaly_frames: 3, merge_gap: 5 }
    }
}

/// Pointer state after consuming a prefix of the stream.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StreamState {
    /// Current slot; `None` before the first slot of an open period.
    pub workflow_ptr: Option<usize>,
    /// Index of the next frame to consume.
    pub stream_ptr: usize,
    pub current_period_start: Option<usize>,
    pub completed: Vec<Interval>,
    /// Slots matched at least once in the open period.
    pub matched_slots: Vec<bool>,
    /// Frames spent in the current slot.
    pub slot_frames: usize,
    pub deviation_run: usize,
    /// Maximal runs of deviating frames, `[start, end)`.
    pub deviations: Vec<(usize, usize)>,
}

impl StreamState {
    pub fn new(wf: &Workflow) -> Self {
        StreamState {
            workflow_ptr: None,
            stream_ptr: 0,
            current_period_start: None,
            completed: Vec::new(),
            matched_slots: vec![false; wf.len()],
            slot_frames: 0,
            deviation_run: 0,
            deviations: Vec::new(),
        }
    }

    /// State with a period already open at frame `at`, pointer before slot 0.
    pub fn opened_at(wf: &Workflow, at: usize) -> Self {
        let mut s = StreamState::new(wf);
        s.stream_ptr = at;
        s.current_period_start = Some(at);
        s
    }

    fn open(&mut self, wf: &Workflow, t: usize) {
        self.current_period_start = Some(t);
        self.matched_slots.iter_mut().for_each(|m| *m = false);
        let start = start_slot(wf);
        self.workflow_ptr = Some(start);
        self.matched_slots[start] = true;
        self.slot_frames = 1;
        self.deviation_run = 0;
    }

    fn deviate(&mut self, t: usize) {
        self.deviation_run += 1;
        match self.deviations.last_mut() {
            Some(run) if run.1 == t => run.1 = t + 1,
            _ => self.deviations.push((t, t + 1)),
        }
    }
}

/// Index of the slot the start symbol belongs to.
fn start_slot(wf: &Workflow) -> usize {
    wf.slots
        .iter()
        .position(|s| !s.skippable && s.accepts(wf.start_symbol))
        .or_else(|| wf.slots.iter().position(|s| s.accepts(wf.start_symbol)))
        .unwrap_or(0)
}

/// True when the open period could end here: the current slot is satisfied
/// and every later slot may be skipped.
fn can_close(state: &StreamState, wf: &Workflow) -> bool {
    let Some(ptr) = state.workflow_ptr else {
        return false;
    };
    (state.matched_slots[ptr] || wf.slots[ptr].skippable)
        && wf.slots[ptr + 1..].iter().all(|s| s.skippable)
}

/// Slot reached by `token` from the current pointer: the current slot, or
/// the next slot once the current is satisfied or skippable, looking through
/// consecutive skippable slots.
fn reachable(state: &StreamState, wf: &Workflow, token: Token) -> Option<usize> {
    let (mut j, satisfied) = match state.workflow_ptr {
        Some(p) => {
            if wf.slots[p].accepts(token) {
                return Some(p);
            }
            (p + 1, state.matched_slots[p] || wf.slots[p].skippable)
        }
        None => (0, true),
    };
    if !satisfied {
        return None;
    }
    while j < wf.len() {
        if wf.slots[j].accepts(token) {
            return Some(j);
        }
        if !wf.slots[j].skippable {
            return None;
        }
        j += 1;
    }
    None
}

/// Consumes one token.
pub fn step(mut state: StreamState, token: Token, wf: &Workflow, cfg: &StreamConfig) -> StreamState {
    let t = state.stream_ptr;
    state.stream_ptr += 1;
    let Some(period_start) = state.current_period_start else {
        if token == wf.start_symbol {
            state.open(wf, t);
        }
        return state;
    };
    if let Some(p) = state.workflow_ptr {
        if wf.slots[p].accepts(token) {
            state.matched_slots[p] = true;
            state.slot_frames += 1;
            state.deviation_run = 0;
            return state;
        }
    }
    if token == wf.start_symbol {
        let elapsed = (t - period_start) as f64;
        if can_close(&state, wf) || elapsed >= cfg.resync_ratio * wf.total_duration() {
            state.completed.push(Interval::frames(period_start, t).expect("period has frames"));
            state.open(wf, t);
            return state;
        }
    }
    match reachable(&state, wf, token) {
        Some(j) => {
            state.workflow_ptr = Some(j);
            state.matched_slots[j] = true;
            state.slot_frames = 1;
            state.deviation_run = 0;
        }
        None => state.deviate(t),
    }
    state
}

/// Closes the open period at end of stream if the workflow could be complete.
pub fn finish(mut state: StreamState, wf: &Workflow) -> StreamState {
    if let Some(start) = state.current_period_start {
        if can_close(&state, wf) && state.stream_ptr > start {
            state.completed.push(Interval::frames(start, state.stream_ptr).expect("period has frames"));
            state.current_period_start = None;
            state.workflow_ptr = None;
        }
    }
    state
}

/// Feeds every token through [`step`].
pub fn run(tokens: &[Token], wf: &Workflow, cfg: &StreamConfig) -> StreamState {
    tokens.iter().fold(StreamState::new(wf), |s, &tok| step(s, tok, wf, cfg))
}

/// Completed periods of a token stream; a trailing incomplete period is
/// left out.
pub fn detect_periods(tokens: &HardTranscript, wf: &Workflow, cfg: &StreamConfig) -> PeriodSegmentation {
    let state = finish(run(&tokens.tokens, wf, cfg), wf);
    PeriodSegmentation { boundaries: state.completed }
}

/// Remaining share of the open period, in `[0, 1]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CompletionEstimate {
    pub remaining: f64,
}

/// Duration-weighted remaining proportion of the last open period.
///
/// `remaining = (sum of mean durations of slots after the pointer +
/// max(0, current slot mean - frames spent in it)) / total mean duration`.
pub fn track_completion(partial: &HardTranscript, wf: &Workflow, cfg: &StreamConfig) -> Result<CompletionEstimate> {
    let state = run(&partial.tokens, wf, cfg);
    Ok(CompletionEstimate { remaining: remaining_from(&state, wf)? })
}

/// Remaining proportion implied by a stream state.
pub fn remaining_from(state: &StreamState, wf: &Workflow) -> Result<f64> {
    if state.current_period_start.is_none() {
        return Err(Error::NoOpenPeriod);
    }
    let total = wf.total_duration();
    let (ahead, residue) = match state.workflow_ptr {
        Some(p) => {
            let ahead: f64 = wf.slots[p + 1..].iter().map(|s| s.mean_duration).sum();
            (ahead, (wf.slots[p].mean_duration - state.slot_frames as f64).max(0.0))
        }
        None => (total, 0.0),
    };
    Ok(((ahead + residue) / total).clamp(0.0, 1.0))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AnomalyReport {
    pub interval: Option<Interval>,
}

/// Longest deviating stretch after dropping runs shorter than
/// `min_anomaly_frames` and merging runs separated by fewer than
/// `merge_gap` frames.
pub fn longest_deviation(runs: &[(usize, usize)], cfg: &StreamConfig) -> Option<(usize, usize)> {
    let mut merged: Vec<(usize, usize)> = Vec::new();
    for &(s, e) in runs.iter().filter(|(s, e)| e - s >= cfg.min_anomaly_frames.max(1)) {
        match merged.last_mut() {
            Some(last) if s - last.1 < cfg.merge_gap => last.1 = e,
            _ => merged.push((s, e)),
        }
    }
    merged.into_iter().fold(None, |best: Option<(usize, usize)>, r| match best {
        Some(b) if b.1 - b.0 >= r.1 - r.0 => Some(b),
        _ => Some(r),
    })
}

/// Localizes the main deviation inside one period whose first token sits at
/// frame `offset`.
pub fn localize_anomaly(period_tokens: &HardTranscript, offset: usize, wf: &Workflow, cfg: &StreamConfig) -> AnomalyReport {
    let state = period_tokens
        .tokens
        .iter()
        .fold(StreamState::opened_at(wf, offset), |s, &tok| step(s, tok, wf, cfg));
    let interval = longest_deviation(&state.deviations, cfg)
        .map(|(s, e)| Interval::frames(s, e).expect("deviation has frames"));
    AnomalyReport { interval }
}
