//! Multiple transcript alignment.
//!
//! An m-dimensional Needleman–Wunsch: cell `F[pos]` holds the best score for
//! aligning the prefixes `transcripts[i][..pos[i]]`. Every predecessor is
//! reached by decrementing a nonempty subset of coordinates, and the moved
//! coordinates contribute their token to the column while the others
//! contribute a gap. Columns are scored by [`score_match`].
//!
//! The axis edges of `F` are preset to `linspace(0, -m * d, d)` and never
//! recomputed; every other cell (faces included) is filled by the
//! recurrence. Joint alignment is exact but costs `prod(len_i + 1)` cells,
//! so [`align`] falls back to a center-star progressive scheme beyond a
//! configurable size.

use alloc::vec;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::Token;

/// One aligned cell: a token or a gap.
pub type Cell = Option<Token>;

/// Largest m for which the pointer bitsets fit.
pub const MAX_JOINT_LIMIT: usize = 5;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Alignment {
    pub rows: Vec<Vec<Cell>>,
    pub score: f64,
}

impl Alignment {
    pub fn width(&self) -> usize {
        self.rows.first().map_or(0, Vec::len)
    }

    pub fn column(&self, c: usize) -> Vec<Cell> {
        self.rows.iter().map(|r| r[c]).collect()
    }

    /// Row `i` with gaps removed.
    pub fn ungapped(&self, i: usize) -> Vec<Token> {
        self.rows[i].iter().flatten().copied().collect()
    }

    /// Sum of [`score_match`] over columns (no boundary profile).
    pub fn column_score(&self) -> f64 {
        (0..self.width()).map(|c| score_match(&self.column(c)) as f64).sum()
    }

    /// Checks equal row lengths, the gap-removal round trip and that no
    /// column is entirely gaps.
    pub fn is_valid_for(&self, transcripts: &[Vec<Token>]) -> bool {
        if self.rows.len() != transcripts.len() {
            return false;
        }
        let w = self.width();
        if self.rows.iter().any(|r| r.len() != w) {
            return false;
        }
        if (0..self.rows.len()).any(|i| self.ungapped(i) != transcripts[i]) {
            return false;
        }
        (0..w).all(|c| self.rows.iter().any(|r| r[c].is_some()))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AlignConfig {
    /// Largest m aligned jointly; more sequences go progressive.
    pub max_joint: usize,
    pub max_cells: u128,
    /// Carried for configuration compatibility; gap cost comes from
    /// [`score_match`] and does not read this.
    pub gap_penalty: f64,
}

impl Default for AlignConfig {
    fn default() -> Self {
        AlignConfig { max_joint: 4, max_cells: 50_000_000, gap_penalty: -1.0 }
    }
}

/// Column score. With any gap: minus the gap count. Otherwise the number of
/// equal ordered pairs `(i, j)`, `i == j` included, minus the column height.
pub fn score_match(chars: &[Cell]) -> i64 {
    let gaps = chars.iter().filter(|c| c.is_none()).count();
    if gaps > 0 {
        return -(gaps as i64);
    }
    let mut equal = 0i64;
    for a in chars {
        for b in chars {
            if a == b {
                equal += 1;
            }
        }
    }
    equal - chars.len() as i64
}

/// Positions reachable by decrementing a nonempty subset of the nonzero
/// coordinates of `pos`, in ascending subset-bitmask order.
pub fn get_neighbors(pos: &[usize], dims: &[usize]) -> Vec<Vec<usize>> {
    debug_assert!(pos.iter().zip(dims).all(|(p, d)| p < d));
    let m = pos.len();
    let mut out: Vec<Vec<usize>> = Vec::new();
    for mask in 1u32..(1 << m) {
        let n: Vec<usize> = (0..m)
            .map(|j| if mask & (1 << j) != 0 && pos[j] > 0 { pos[j] - 1 } else { pos[j] })
            .collect();
        if n.as_slice() != pos && !out.contains(&n) {
            out.push(n);
        }
    }
    out
}

/// Score table plus, per cell, the set of optimal predecessor moves.
///
/// A move is a subset bitmask of decremented coordinates; `moves[cell]` has
/// bit `mask` set when that move attains the maximum.
#[derive(Debug, Clone, PartialEq)]
pub struct DpState {
    pub dims: Vec<usize>,
    pub scores: Vec<f64>,
    pub moves: Vec<u32>,
    /// Optimal moves per cell in the order the backtrace consults them.
    order: Vec<u8>,
}

impl DpState {
    fn strides(&self) -> Vec<usize> {
        let mut strides = vec![1; self.dims.len()];
        for i in (0..self.dims.len().saturating_sub(1)).rev() {
            strides[i] = strides[i + 1] * self.dims[i + 1];
        }
        strides
    }

    pub fn index(&self, pos: &[usize]) -> usize {
        self.strides().iter().zip(pos).map(|(s, p)| s * p).sum()
    }

    pub fn score(&self, pos: &[usize]) -> f64 {
        self.scores[self.index(pos)]
    }

    /// Optimal predecessors of `pos`, backtrace choice first.
    pub fn predecessors(&self, pos: &[usize]) -> Vec<Vec<usize>> {
        let idx = self.index(pos);
        let first = self.order[idx];
        let mut masks: Vec<u32> = Vec::new();
        if self.moves[idx] != 0 {
            masks.push(first as u32);
            for mask in (1..(1u32 << self.dims.len())).rev() {
                if mask != first as u32 && self.moves[idx] & (1 << mask) != 0 {
                    masks.push(mask);
                }
            }
        }
        masks.into_iter().map(|mask| apply_move(pos, mask)).collect()
    }
}

fn apply_move(pos: &[usize], mask: u32) -> Vec<usize> {
    pos.iter()
        .enumerate()
        .map(|(j, &p)| if mask & (1 << j) != 0 { p - 1 } else { p })
        .collect()
}

/// Zero table with the axis edges preset to `linspace(0, -m * d, d)`.
pub fn initialize_matrix(transcripts: &[Vec<Token>]) -> Result<DpState> {
    let m = transcripts.len();
    if m < 2 {
        return Err(Error::TooFewSequences(m));
    }
    if m > MAX_JOINT_LIMIT {
        return Err(Error::TooManySequences(m));
    }
    if transcripts.iter().any(Vec::is_empty) {
        return Err(Error::EmptyTranscript);
    }
    let dims: Vec<usize> = transcripts.iter().map(|t| t.len() + 1).collect();
    let cells: usize = dims.iter().product();
    let mut state =
        DpState { dims: dims.clone(), scores: vec![0.0; cells], moves: vec![0; cells], order: vec![0; cells] };
    let strides = state.strides();
    for (axis, &d) in dims.iter().enumerate() {
        let end = -((m * d) as f64);
        for c in 0..d {
            state.scores[c * strides[axis]] = end * c as f64 / (d - 1) as f64;
        }
    }
    Ok(state)
}

fn cell_count(transcripts: &[Vec<Token>]) -> u128 {
    transcripts.iter().map(|t| t.len() as u128 + 1).product()
}

/// Runs the recurrence over every cell except the preset axis edges.
pub fn fill_matrix(transcripts: &[Vec<Token>]) -> Result<DpState> {
    let mut state = initialize_matrix(transcripts)?;
    let m = transcripts.len();
    let strides = state.strides();
    let total = state.scores.len();
    let mut pos = vec![0usize; m];
    let mut column: Vec<Cell> = vec![None; m];
    for idx in 0..total {
        // decode idx into pos
        let mut rem = idx;
        for j in 0..m {
            pos[j] = rem / strides[j];
            rem %= strides[j];
        }
        let nonzero = pos.iter().filter(|&&p| p > 0).count();
        if nonzero <= 1 {
            continue;
        }
        let live: u32 = (0..m).filter(|&j| pos[j] > 0).fold(0, |acc, j| acc | (1 << j));
        let mut best = f64::NEG_INFINITY;
        let mut best_moves = 0u32;
        let mut first = 0u8;
        for mask in (1..(1u32 << m)).rev() {
            if mask & !live != 0 {
                continue;
            }
            let mut prev = idx;
            for j in 0..m {
                if mask & (1 << j) != 0 {
                    prev -= strides[j];
                    column[j] = Some(transcripts[j][pos[j] - 1]);
                } else {
                    column[j] = None;
                }
            }
            let s = state.scores[prev] + score_match(&column) as f64;
            if s > best {
                best = s;
                best_moves = 1 << mask;
                first = mask as u8;
            } else if s == best {
                best_moves |= 1 << mask;
            }
        }
        state.scores[idx] = best;
        state.moves[idx] = best_moves;
        state.order[idx] = first;
    }
    Ok(state)
}

/// Exact joint alignment of 2..=`cfg.max_joint` transcripts.
///
/// Among equally good predecessors the backtrace takes the move that
/// advances the most sequences (largest subset bitmask).
pub fn mta_align(transcripts: &[Vec<Token>], cfg: &AlignConfig) -> Result<Alignment> {
    let m = transcripts.len();
    if m > cfg.max_joint.min(MAX_JOINT_LIMIT) {
        return Err(Error::TooManySequences(m));
    }
    let cells = cell_count(transcripts);
    if cells > cfg.max_cells {
        return Err(Error::MatrixTooLarge { cells, limit: cfg.max_cells });
    }
    let state = fill_matrix(transcripts)?;
    let dims = state.dims.clone();
    let terminal: Vec<usize> = dims.iter().map(|d| d - 1).collect();
    let score = state.score(&terminal);
    let mut cols: Vec<Vec<Cell>> = Vec::new();
    let mut cur = terminal;
    loop {
        let idx = state.index(&cur);
        if cur.iter().all(|&p| p == 0) || state.moves[idx] == 0 {
            break;
        }
        let mask = state.order[idx] as u32;
        let col: Vec<Cell> = (0..m)
            .map(|j| if mask & (1 << j) != 0 { Some(transcripts[j][cur[j] - 1]) } else { None })
            .collect();
        cols.push(col);
        cur = apply_move(&cur, mask);
    }
    // stopped on an axis: the one live prefix runs against gaps
    for j in 0..m {
        while cur[j] > 0 {
            let mut col = vec![None; m];
            col[j] = Some(transcripts[j][cur[j] - 1]);
            cols.push(col);
            cur[j] -= 1;
        }
    }
    cols.reverse();
    Ok(Alignment { rows: transpose(&cols, m), score })
}

fn transpose(cols: &[Vec<Cell>], m: usize) -> Vec<Vec<Cell>> {
    (0..m).map(|i| cols.iter().map(|c| c[i]).collect()).collect()
}

/// Two-sequence special case of [`mta_align`].
pub fn pairwise_nw(a: &[Token], b: &[Token]) -> Result<Alignment> {
    let cfg = AlignConfig { max_joint: 2, max_cells: u128::MAX, ..AlignConfig::default() };
    mta_align(&[a.to_vec(), b.to_vec()], &cfg)
}

/// Majority non-gap token of each column; ties go to the smaller token.
pub fn consensus(rows: &[Vec<Cell>]) -> Vec<Option<Token>> {
    let width = rows.first().map_or(0, Vec::len);
    (0..width)
        .map(|c| {
            let mut tokens: Vec<Token> = rows.iter().filter_map(|r| r[c]).collect();
            tokens.sort_unstable();
            let mut best: Option<(usize, Token)> = None;
            let mut i = 0;
            while i < tokens.len() {
                let mut j = i;
                while j < tokens.len() && tokens[j] == tokens[i] {
                    j += 1;
                }
                if best.is_none_or(|(n, _)| j - i > n) {
                    best = Some((j - i, tokens[i]));
                }
                i = j;
            }
            best.map(|(_, t)| t)
        })
        .collect()
}

/// Center-star progressive alignment.
///
/// The center is the transcript with the highest summed pairwise score.
/// Every other transcript, in input order, is aligned against the current
/// column consensus; new gaps are pushed into all earlier rows and existing
/// gaps are never removed. The score is the plain column sum.
pub fn progressive_align(transcripts: &[Vec<Token>]) -> Result<Alignment> {
    let m = transcripts.len();
    if m == 0 {
        return Err(Error::TooFewSequences(0));
    }
    if transcripts.iter().any(Vec::is_empty) {
        return Err(Error::EmptyTranscript);
    }
    if m == 1 {
        let rows = vec![transcripts[0].iter().map(|&t| Some(t)).collect()];
        let mut al = Alignment { rows, score: 0.0 };
        al.score = al.column_score();
        return Ok(al);
    }
    let mut sums = vec![0.0; m];
    for i in 0..m {
        for j in i + 1..m {
            let s = pairwise_nw(&transcripts[i], &transcripts[j])?.score;
            sums[i] += s;
            sums[j] += s;
        }
    }
    let mut center = 0;
    for i in 1..m {
        if sums[i] > sums[center] {
            center = i;
        }
    }

    let mut order = vec![center];
    let mut rows: Vec<Vec<Cell>> = vec![transcripts[center].iter().map(|&t| Some(t)).collect()];
    for (i, t) in transcripts.iter().enumerate() {
        if i == center {
            continue;
        }
        let cons: Vec<Token> = consensus(&rows).into_iter().map(|c| c.expect("no all-gap column")).collect();
        let pair = pairwise_nw(&cons, t)?;
        let mut merged: Vec<Vec<Cell>> = vec![Vec::with_capacity(pair.width()); rows.len() + 1];
        let mut src = 0;
        for c in 0..pair.width() {
            if pair.rows[0][c].is_some() {
                for (dst, row) in merged.iter_mut().zip(&rows) {
                    dst.push(row[src]);
                }
                src += 1;
            } else {
                for dst in merged.iter_mut().take(rows.len()) {
                    dst.push(None);
                }
            }
            merged[rows.len()].push(pair.rows[1][c]);
        }
        rows = merged;
        order.push(i);
    }
    let mut out = vec![Vec::new(); m];
    for (row, &i) in rows.into_iter().zip(&order) {
        out[i] = row;
    }
    let mut al = Alignment { rows: out, score: 0.0 };
    al.score = al.column_score();
    Ok(al)
}

/// Joint alignment when affordable, progressive otherwise.
pub fn align(transcripts: &[Vec<Token>], cfg: &AlignConfig) -> Result<Alignment> {
    let m = transcripts.len();
    if m >= 2 && m <= cfg.max_joint.min(MAX_JOINT_LIMIT) && cell_count(transcripts) <= cfg.max_cells {
        mta_align(transcripts, cfg)
    } else {
        progressive_align(transcripts)
    }
}
