//! Initial period window estimation.
//!
//! The soft transcript is treated as a T x K image. Its 2D DFT magnitude is
//! summed over the token-frequency axis, leaving a temporal spectrum whose
//! strongest non-DC components propose candidate windows `round(T / v)`.
//! Candidates are then re-ranked by how similar consecutive window-sized
//! segments are under DTW.

use alloc::vec;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fft::{fft, Complex};
use crate::model::{HardTranscript, SoftTranscript};
use crate::tokenizer::distance;

/// Temporal magnitude spectrum, one entry per frequency index `v`.
#[derive(Debug, Clone, PartialEq)]
pub struct MagnitudeSpectrum {
    pub mags: Vec<f64>,
}

impl MagnitudeSpectrum {
    pub fn len(&self) -> usize {
        self.mags.len()
    }

    pub fn is_empty(&self) -> bool {
        self.mags.is_empty()
    }
}

/// Ranked candidate window sizes, best first.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct WindowCandidates {
    pub windows: Vec<usize>,
}

/// Which transcript drives window initialization.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum WindowToken {
    #[default]
    Soft,
    /// 1D spectrum of the hard token indices (ablation arm).
    Hard,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PeriodConfig {
    pub min_window: usize,
    /// Defaults to `floor(T / 3)` when unset.
    pub max_window: Option<usize>,
    pub top_f: usize,
    pub rerank: bool,
    pub window_token: WindowToken,
    /// Optional Sakoe-Chiba half-width for the re-ranking DTW.
    pub dtw_band: Option<usize>,
}

impl Default for PeriodConfig {
    fn default() -> Self {
        PeriodConfig {
            min_window: 2,
            max_window: None,
            top_f: 3,
            rerank: true,
            window_token: WindowToken::Soft,
            dtw_band: None,
        }
    }
}

/// Context-marginalized temporal spectrum of a soft transcript:
/// `mags[v] = sum_u |F(u, v)|` with `F` the 2D DFT over (token, time).
pub fn marginal_spectrum(st: &SoftTranscript) -> Result<MagnitudeSpectrum> {
    let t_len = st.len();
    if t_len < 2 {
        return Err(Error::SequenceTooShort(t_len));
    }
    let k = st.k();
    // token axis first: one K-point transform per frame
    let per_frame: Vec<Vec<Complex>> = st
        .rows
        .iter()
        .map(|row| fft(&row.iter().map(|&x| Complex::new(x, 0.0)).collect::<Vec<_>>()))
        .collect();
    let mut mags = vec![0.0; t_len];
    let mut column = vec![Complex::ZERO; t_len];
    for u in 0..k {
        for (c, frame) in column.iter_mut().zip(&per_frame) {
            *c = frame[u];
        }
        for (m, f) in mags.iter_mut().zip(fft(&column)) {
            *m += f.norm();
        }
    }
    Ok(MagnitudeSpectrum { mags })
}

/// 1D magnitude spectrum of the raw token index sequence.
pub fn hard_spectrum(hard: &HardTranscript) -> Result<MagnitudeSpectrum> {
    if hard.len() < 2 {
        return Err(Error::SequenceTooShort(hard.len()));
    }
    let signal: Vec<Complex> = hard.tokens.iter().map(|t| Complex::new(t.0 as f64, 0.0)).collect();
    Ok(MagnitudeSpectrum { mags: fft(&signal).into_iter().map(Complex::norm).collect() })
}

/// The `top_f` strongest non-DC frequencies whose window `round(T / v)`
/// lies in `[min_window, max_window]`, deduplicated by window.
///
/// Ties on magnitude prefer the smaller `v`. Components below `1e-9` of the
/// spectrum maximum count as absent.
pub fn top_windows(
    ms: &MagnitudeSpectrum,
    min_window: usize,
    max_window: usize,
    top_f: usize,
) -> Result<WindowCandidates> {
    let t_len = ms.len();
    if min_window < 1 || min_window >= max_window || max_window > t_len {
        return Err(Error::InvalidWindowBounds { min: min_window, max: max_window, len: t_len });
    }
    let peak = ms.mags.iter().copied().fold(0.0, f64::max);
    let floor = peak * 1e-9;
    let mut order: Vec<usize> = (1..t_len).filter(|&v| ms.mags[v] > floor).collect();
    order.sort_by(|&a, &b| ms.mags[b].total_cmp(&ms.mags[a]).then(a.cmp(&b)));
    let mut windows: Vec<usize> = Vec::new();
    for v in order {
        let w = libm::round(t_len as f64 / v as f64) as usize;
        if w < min_window || w > max_window || windows.contains(&w) {
            continue;
        }
        windows.push(w);
        if windows.len() == top_f {
            break;
        }
    }
    if windows.is_empty() {
        return Err(Error::NoPeriodicity);
    }
    Ok(WindowCandidates { windows })
}

/// DTW with Euclidean local cost over steps right, down and diagonal.
/// `band` restricts `|i - j|` (after length rescaling) when set.
pub fn dtw_distance(a: &[Vec<f64>], b: &[Vec<f64>], band: Option<usize>) -> Result<f64> {
    if a.is_empty() || b.is_empty() {
        return Err(Error::EmptySegment);
    }
    if a[0].len() != b[0].len() {
        return Err(Error::DimensionMismatch { expected: a[0].len(), found: b[0].len() });
    }
    let (n, m) = (a.len(), b.len());
    let inside = |i: usize, j: usize| match band {
        None => true,
        Some(r) => {
            // compare on the diagonal of the n x m grid
            let scaled = (i * m) as f64 / n as f64;
            libm::fabs(scaled - j as f64) <= r as f64 + (m as f64 / n as f64).max(1.0)
        }
    };
    let mut prev = vec![f64::INFINITY; m + 1];
    let mut cur = vec![f64::INFINITY; m + 1];
    prev[0] = 0.0;
    for i in 1..=n {
        cur[0] = f64::INFINITY;
        for j in 1..=m {
            if !inside(i - 1, j - 1) {
                cur[j] = f64::INFINITY;
                continue;
            }
            let best = prev[j - 1].min(prev[j]).min(cur[j - 1]);
            cur[j] = best + distance(&a[i - 1], &b[j - 1]);
        }
        core::mem::swap(&mut prev, &mut cur);
    }
    Ok(prev[m])
}

/// Consecutive segments of length `w`; a trailing partial of at least `w/2`
/// frames is kept.
fn partition(rows: &[Vec<f64>], w: usize) -> Vec<&[Vec<f64>]> {
    let mut out: Vec<&[Vec<f64>]> = rows.chunks(w).collect();
    if let Some(last) = out.last() {
        if last.len() * 2 < w {
            out.pop();
        }
    }
    out
}

/// Mean consecutive-segment DTW distance divided by `w`, or `None` when the
/// partition has fewer than two segments.
pub fn window_score(rows: &[Vec<f64>], w: usize, band: Option<usize>) -> Result<Option<f64>> {
    let segments = partition(rows, w);
    if segments.len() < 2 {
        return Ok(None);
    }
    let mut total = 0.0;
    for pair in segments.windows(2) {
        total += dtw_distance(pair[0], pair[1], band)?;
    }
    Ok(Some(total / (segments.len() - 1) as f64 / w as f64))
}

/// Orders candidates by ascending [`window_score`]; ties keep spectral order.
pub fn rerank_windows(
    st: &SoftTranscript,
    wc: &WindowCandidates,
    band: Option<usize>,
) -> Result<WindowCandidates> {
    if wc.windows.is_empty() {
        return Err(Error::DegeneratePartition);
    }
    if wc.windows.len() == 1 {
        return Ok(wc.clone());
    }
    let mut scored: Vec<(f64, usize)> = Vec::new();
    for &w in &wc.windows {
        if let Some(s) = window_score(&st.rows, w, band)? {
            scored.push((s, w));
        }
    }
    if scored.is_empty() {
        return Err(Error::DegeneratePartition);
    }
    scored.sort_by(|a, b| a.0.total_cmp(&b.0));
    Ok(WindowCandidates { windows: scored.into_iter().map(|(_, w)| w).collect() })
}

fn resolve_bounds(t_len: usize, cfg: &PeriodConfig) -> Result<(usize, usize)> {
    if t_len < 3 * cfg.min_window.max(1) {
        return Err(Error::SequenceTooShort(t_len));
    }
    let max = cfg.max_window.unwrap_or(t_len / 3).min(t_len);
    if cfg.min_window < 1 || max <= cfg.min_window {
        return Err(Error::InvalidWindowBounds { min: cfg.min_window, max, len: t_len });
    }
    Ok((cfg.min_window, max))
}

fn choose(ms: &MagnitudeSpectrum, rows: &SoftTranscript, cfg: &PeriodConfig) -> Result<usize> {
    let (min, max) = resolve_bounds(rows.len(), cfg)?;
    let candidates = top_windows(ms, min, max, cfg.top_f.max(1))?;
    let ranked = if cfg.rerank {
        rerank_windows(rows, &candidates, cfg.dtw_band).or_else(|e| match e {
            Error::DegeneratePartition => Ok(candidates),
            other => Err(other),
        })?
    } else {
        candidates
    };
    Ok(ranked.windows[0])
}

/// Spectrum, top candidates and (optionally) DTW re-ranking on the soft
/// transcript. Returns the best window in frames.
pub fn estimate_period_window(st: &SoftTranscript, cfg: &PeriodConfig) -> Result<usize> {
    let ms = marginal_spectrum(st)?;
    choose(&ms, st, cfg)
}

/// Hard-token arm: 1D spectrum of token indices, re-ranked on one-hot rows.
pub fn estimate_period_window_hard(hard: &HardTranscript, k: usize, cfg: &PeriodConfig) -> Result<usize> {
    let ms = hard_spectrum(hard)?;
    choose(&ms, &SoftTranscript::one_hot(hard, k), cfg)
}
