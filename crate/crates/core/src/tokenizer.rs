//! Codebook fitting and frame tokenization.
//!
//! Frames are clustered with k-means (k-means++ seeding, Lloyd refinement)
//! and then encoded either as the nearest centroid index (hard tokens) or
//! as a softmax over negated centroid distances (soft tokens).

use alloc::vec;
use alloc::vec::Vec;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::model::{
    Codebook, FeatureSequence, HardTranscript, SoftTranscript, Token, TokenRun, TokenRunSequence,
};

/// Independent k-means++ seedings per fit.
pub const RESTARTS: usize = 4;
const MAX_ITERATIONS: usize = 300;
const CONVERGENCE_SHIFT: f64 = 1e-6;

/// Smallest and largest alphabet sizes tried by [`auto_k`].
pub const AUTO_K_RANGE: (usize, usize) = (6, 14);

pub(crate) fn squared_distance(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

pub(crate) fn distance(a: &[f64], b: &[f64]) -> f64 {
    libm::sqrt(squared_distance(a, b))
}

/// Index of the nearest centroid; ties go to the lowest index.
fn nearest(frame: &[f64], centroids: &[Vec<f64>]) -> usize {
    let mut best = 0;
    let mut best_d = f64::INFINITY;
    for (k, c) in centroids.iter().enumerate() {
        let d = squared_distance(frame, c);
        if d < best_d {
            best_d = d;
            best = k;
        }
    }
    best
}

fn check_dim(seq: &FeatureSequence, cb: &Codebook) -> Result<()> {
    if seq.dim() != cb.dim() {
        return Err(Error::DimensionMismatch { expected: cb.dim(), found: seq.dim() });
    }
    Ok(())
}

/// Per-dimension z-normalization. Constant dimensions are only centered.
pub fn normalize(seq: &FeatureSequence) -> FeatureSequence {
    let n = seq.dim();
    let t = seq.len() as f64;
    let mut mean = vec![0.0; n];
    for frame in seq.frames() {
        for (m, x) in mean.iter_mut().zip(frame) {
            *m += x / t;
        }
    }
    let mut var = vec![0.0; n];
    for frame in seq.frames() {
        for ((v, x), m) in var.iter_mut().zip(frame).zip(&mean) {
            *v += (x - m) * (x - m) / t;
        }
    }
    let frames = seq
        .frames()
        .iter()
        .map(|frame| {
            frame
                .iter()
                .zip(mean.iter().zip(&var))
                .map(|(x, (m, v))| {
                    let sd = libm::sqrt(*v);
                    if sd > 0.0 {
                        (x - m) / sd
                    } else {
                        x - m
                    }
                })
                .collect()
        })
        .collect();
    FeatureSequence::new(seq.id(), frames, seq.frame_rate()).expect("normalization keeps frames finite")
}

fn kmeans_pp(frames: &[Vec<f64>], k: usize, rng: &mut ChaCha8Rng) -> Vec<Vec<f64>> {
    let mut centroids = Vec::with_capacity(k);
    centroids.push(frames[rng.random_range(0..frames.len())].clone());
    let mut d2: Vec<f64> = frames.iter().map(|f| squared_distance(f, &centroids[0])).collect();
    while centroids.len() < k {
        let total: f64 = d2.iter().sum();
        let pick = if total > 0.0 {
            let mut target = rng.random::<f64>() * total;
            let mut chosen = frames.len() - 1;
            for (i, d) in d2.iter().enumerate() {
                if *d > 0.0 && target < *d {
                    chosen = i;
                    break;
                }
                target -= d;
            }
            // rounding can walk past the last positive weight
            if d2[chosen] == 0.0 {
                chosen = d2.iter().rposition(|d| *d > 0.0).unwrap_or(chosen);
            }
            chosen
        } else {
            rng.random_range(0..frames.len())
        };
        let c = frames[pick].clone();
        for (d, f) in d2.iter_mut().zip(frames) {
            let nd = squared_distance(f, &c);
            if nd < *d {
                *d = nd;
            }
        }
        centroids.push(c);
    }
    centroids
}

/// Moves the point farthest from its centroid in the largest cluster into
/// each empty cluster.
fn repair_empty(frames: &[Vec<f64>], centroids: &mut [Vec<f64>], labels: &mut [usize]) {
    let k = centroids.len();
    loop {
        let mut counts = vec![0usize; k];
        for &l in labels.iter() {
            counts[l] += 1;
        }
        let Some(empty) = counts.iter().position(|&c| c == 0) else {
            return;
        };
        let largest = (0..k).max_by_key(|&j| (counts[j], core::cmp::Reverse(j))).unwrap();
        if counts[largest] < 2 {
            return;
        }
        let mut far = usize::MAX;
        let mut far_d = -1.0;
        for (i, f) in frames.iter().enumerate() {
            if labels[i] == largest {
                let d = squared_distance(f, &centroids[largest]);
                if d > far_d {
                    far_d = d;
                    far = i;
                }
            }
        }
        labels[far] = empty;
        centroids[empty] = frames[far].clone();
    }
}

fn update_means(frames: &[Vec<f64>], labels: &[usize], centroids: &mut [Vec<f64>]) {
    let n = frames[0].len();
    let k = centroids.len();
    let mut sums = vec![vec![0.0; n]; k];
    let mut counts = vec![0usize; k];
    for (f, &l) in frames.iter().zip(labels) {
        counts[l] += 1;
        for (s, x) in sums[l].iter_mut().zip(f) {
            *s += x;
        }
    }
    for j in 0..k {
        if counts[j] > 0 {
            let c = counts[j] as f64;
            for (dst, s) in centroids[j].iter_mut().zip(&sums[j]) {
                *dst = s / c;
            }
        }
    }
}

/// Fits K centroids with k-means++ seeding and Lloyd iterations, keeping
/// the lowest-inertia result over [`RESTARTS`] seedings.
///
/// Deterministic for a fixed `(seq, k, seed)`.
pub fn fit_codebook(seq: &FeatureSequence, k: usize, seed: u64) -> Result<Codebook> {
    if k < 2 {
        return Err(Error::InvalidCodebook("need at least two centroids"));
    }
    if seq.len() < k {
        return Err(Error::TooFewFrames { frames: seq.len(), k });
    }
    let frames = seq.frames();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut best: Option<(f64, Vec<Vec<f64>>)> = None;
    for _ in 0..RESTARTS {
        let centroids = lloyd(frames, kmeans_pp(frames, k, &mut rng));
        let cost: f64 = frames.iter().map(|f| squared_distance(f, &centroids[nearest(f, &centroids)])).sum();
        if best.as_ref().is_none_or(|(b, _)| cost < *b) {
            best = Some((cost, centroids));
        }
    }
    Codebook::new(best.expect("at least one restart").1)
}

fn lloyd(frames: &[Vec<f64>], mut centroids: Vec<Vec<f64>>) -> Vec<Vec<f64>> {
    let mut labels = vec![0usize; frames.len()];
    for _ in 0..MAX_ITERATIONS {
        for (l, f) in labels.iter_mut().zip(frames) {
            *l = nearest(f, &centroids);
        }
        repair_empty(frames, &mut centroids, &mut labels);
        let previous = centroids.clone();
        update_means(frames, &labels, &mut centroids);
        let shift = previous
            .iter()
            .zip(&centroids)
            .map(|(a, b)| distance(a, b))
            .fold(0.0, f64::max);
        if shift < CONVERGENCE_SHIFT {
            break;
        }
    }
    centroids
}

/// Within-cluster sum of squared distances under nearest-centroid assignment.
pub fn inertia(seq: &FeatureSequence, cb: &Codebook) -> f64 {
    seq.frames()
        .iter()
        .map(|f| squared_distance(f, &cb.centroids()[nearest(f, cb.centroids())]))
        .sum()
}

/// Picks K in `[lo, hi]` at the elbow of the inertia curve, i.e. where the
/// second difference of `ln I(K)` peaks. On the log scale this is the K
/// whose incoming drop is largest relative to the drop that follows, which
/// does not depend on how spread out the data is. Ties go to the smaller K.
pub fn auto_k(seq: &FeatureSequence, lo: usize, hi: usize, seed: u64) -> Result<usize> {
    let lo = lo.max(3);
    let hi = hi.min(seq.len().saturating_sub(1));
    if hi < lo {
        return Err(Error::TooFewFrames { frames: seq.len(), k: lo });
    }
    let curve: Vec<f64> = (lo - 1..=hi + 1)
        .map(|k| fit_codebook(seq, k, seed).map(|cb| libm::log(inertia(seq, &cb).max(f64::MIN_POSITIVE))))
        .collect::<Result<_>>()?;
    let mut best = lo;
    let mut best_score = f64::NEG_INFINITY;
    for k in lo..=hi {
        let i = k - (lo - 1);
        let score = curve[i - 1] - 2.0 * curve[i] + curve[i + 1];
        if score > best_score {
            best_score = score;
            best = k;
        }
    }
    Ok(best)
}

/// Nearest-centroid symbol per frame; ties go to the lowest index.
pub fn hard_tokenize(seq: &FeatureSequence, cb: &Codebook) -> Result<HardTranscript> {
    check_dim(seq, cb)?;
    let tokens = seq
        .frames()
        .iter()
        .map(|f| Token(nearest(f, cb.centroids()) as u32))
        .collect();
    Ok(HardTranscript { tokens })
}

/// Softmax over negated Euclidean distances to every centroid.
pub fn soft_tokenize(seq: &FeatureSequence, cb: &Codebook) -> Result<SoftTranscript> {
    check_dim(seq, cb)?;
    let rows = seq
        .frames()
        .iter()
        .map(|f| {
            let dists: Vec<f64> = cb.centroids().iter().map(|c| distance(f, c)).collect();
            let shift = dists.iter().copied().fold(f64::INFINITY, f64::min);
            let mut row: Vec<f64> = dists
                .iter()
                .map(|d| libm::exp(-(d - shift)).max(f64::MIN_POSITIVE))
                .collect();
            let total: f64 = row.iter().sum();
            for x in &mut row {
                *x /= total;
            }
            row
        })
        .collect();
    Ok(SoftTranscript { rows })
}

/// Run-length compression; every run carries its first frame index.
pub fn rle_compress(t: &HardTranscript) -> TokenRunSequence {
    let mut runs: Vec<TokenRun> = Vec::new();
    for (i, &tok) in t.tokens.iter().enumerate() {
        match runs.last_mut() {
            Some(run) if run.token == tok => run.len += 1,
            _ => runs.push(TokenRun { token: tok, start: i, len: 1 }),
        }
    }
    TokenRunSequence { runs }
}

/// Absorbs runs shorter than `min_len` frames into the longer neighbor and
/// re-merges equal neighbors. Frame coverage is preserved.
pub fn absorb_short_runs(runs: &TokenRunSequence, min_len: usize) -> TokenRunSequence {
    if min_len <= 1 || runs.runs.len() < 2 {
        return runs.clone();
    }
    let mut out: Vec<TokenRun> = runs.runs.clone();
    loop {
        let Some((idx, _)) = out
            .iter()
            .enumerate()
            .filter(|(_, r)| r.len < min_len)
            .min_by_key(|(i, r)| (r.len, *i))
        else {
            break;
        };
        if out.len() < 2 {
            break;
        }
        let left = idx.checked_sub(1).map(|i| out[i].len);
        let right = out.get(idx + 1).map(|r| r.len);
        let victim = out.remove(idx);
        let into_left = match (left, right) {
            (Some(l), Some(r)) => l >= r,
            (Some(_), None) => true,
            _ => false,
        };
        if into_left {
            out[idx - 1].len += victim.len;
        } else {
            out[idx].start = victim.start;
            out[idx].len += victim.len;
        }
        let mut merged: Vec<TokenRun> = Vec::with_capacity(out.len());
        for r in out {
            match merged.last_mut() {
                Some(last) if last.token == r.token => last.len += r.len,
                _ => merged.push(r),
            }
        }
        out = merged;
    }
    TokenRunSequence { runs: out }
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;

    fn seq(frames: Vec<Vec<f64>>) -> FeatureSequence {
        FeatureSequence::new("t", frames, 1.0).unwrap()
    }

    #[test]
    fn distinct_frames_become_centroids() {
        let frames = vec![vec![0.0, 0.0], vec![5.0, 0.0], vec![0.0, 5.0], vec![5.0, 5.0]];
        let s = seq(frames.clone());
        let cb = fit_codebook(&s, 4, 3).unwrap();
        let mut got: Vec<Vec<f64>> = cb.centroids().to_vec();
        got.sort_by(|a, b| a.partial_cmp(b).unwrap());
        let mut want = frames;
        want.sort_by(|a, b| a.partial_cmp(b).unwrap());
        assert_eq!(got, want);
        assert_eq!(inertia(&s, &cb), 0.0);
    }

    #[test]
    fn identical_frames_collapse_onto_first_centroid() {
        let s = seq(vec![vec![1.5, -2.0]; 6]);
        let cb = fit_codebook(&s, 2, 11).unwrap();
        assert_eq!(cb.centroids()[0], vec![1.5, -2.0]);
        assert_eq!(cb.centroids()[1], vec![1.5, -2.0]);
        let hard = hard_tokenize(&s, &cb).unwrap();
        assert!(hard.tokens.iter().all(|t| *t == Token(0)));
    }

    #[test]
    fn two_tight_groups_recover_group_means() {
        let pts = vec![
            vec![0.0, 0.0],
            vec![0.2, 0.1],
            vec![0.1, 0.3],
            vec![10.0, 10.0],
            vec![10.3, 9.9],
            vec![9.8, 10.2],
        ];
        let s = seq(pts.clone());
        // oracle: best balanced 2-partition by exhaustive enumeration
        let mut best = (f64::INFINITY, vec![], vec![]);
        for mask in 0u32..64 {
            if mask.count_ones() != 3 {
                continue;
            }
            let (a, b): (Vec<_>, Vec<_>) = (0..6).partition(|i| mask & (1 << i) != 0);
            let mean = |idx: &[usize]| {
                let mut m = vec![0.0, 0.0];
                for &i in idx {
                    m[0] += pts[i][0] / idx.len() as f64;
                    m[1] += pts[i][1] / idx.len() as f64;
                }
                m
            };
            let (ma, mb) = (mean(&a), mean(&b));
            let cost: f64 = a.iter().map(|&i| squared_distance(&pts[i], &ma)).sum::<f64>()
                + b.iter().map(|&i| squared_distance(&pts[i], &mb)).sum::<f64>();
            if cost < best.0 {
                best = (cost, ma, mb);
            }
        }
        let cb = fit_codebook(&s, 2, 5).unwrap();
        let mut got = cb.centroids().to_vec();
        got.sort_by(|a, b| a.partial_cmp(b).unwrap());
        let mut want = vec![best.1, best.2];
        want.sort_by(|a, b| a.partial_cmp(b).unwrap());
        for (g, w) in got.iter().zip(&want) {
            for (x, y) in g.iter().zip(w) {
                assert!((x - y).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn too_few_frames() {
        let s = seq(vec![vec![0.0]; 2]);
        assert!(matches!(fit_codebook(&s, 3, 0), Err(Error::TooFewFrames { frames: 2, k: 3 })));
    }

    #[test]
    fn fit_is_deterministic() {
        let frames: Vec<Vec<f64>> =
            (0..50).map(|i| vec![libm::sin(i as f64), libm::cos(i as f64 * 0.7)]).collect();
        let s = seq(frames);
        let a = fit_codebook(&s, 4, 99).unwrap();
        let b = fit_codebook(&s, 4, 99).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn hard_tokens_tie_break_low() {
        let cb = Codebook::new(vec![
            vec![100.0, 100.0],
            vec![-1.0, 0.0],
            vec![1.0, 0.0],
            vec![3.0, 3.0],
        ])
        .unwrap();
        let s = seq(vec![vec![0.0, 0.0], vec![3.0, 3.0]]);
        let hard = hard_tokenize(&s, &cb).unwrap();
        assert_eq!(hard.tokens, vec![Token(1), Token(3)]);
    }

    #[test]
    fn hard_tokens_match_linear_scan() {
        let cb = Codebook::new(vec![vec![0.3, -1.2], vec![2.0, 0.5], vec![-1.7, 0.9]]).unwrap();
        let frames = vec![
            vec![0.1, 0.2],
            vec![1.9, -0.4],
            vec![-2.2, 1.5],
            vec![0.8, 0.8],
            vec![-0.5, -0.9],
        ];
        let s = seq(frames.clone());
        let hard = hard_tokenize(&s, &cb).unwrap();
        for (f, t) in frames.iter().zip(&hard.tokens) {
            let d: Vec<f64> = cb
                .centroids()
                .iter()
                .map(|c| ((f[0] - c[0]).powi(2) + (f[1] - c[1]).powi(2)).sqrt())
                .collect();
            let mut best = 0;
            for k in 1..d.len() {
                if d[k] < d[best] {
                    best = k;
                }
            }
            assert_eq!(t.index(), best);
        }
    }

    #[test]
    fn soft_tokens_uniform_when_equidistant() {
        let cb = Codebook::new(vec![vec![1.0, 0.0], vec![-1.0, 0.0], vec![0.0, 1.0], vec![0.0, -1.0]])
            .unwrap();
        let s = seq(vec![vec![0.0, 0.0]]);
        let soft = soft_tokenize(&s, &cb).unwrap();
        for x in &soft.rows[0] {
            assert!((x - 0.25).abs() < 1e-15);
        }
    }

    #[test]
    fn soft_tokens_peak_at_own_centroid() {
        let cb = Codebook::new(vec![vec![0.0], vec![10.0], vec![20.0], vec![30.0]]).unwrap();
        let s = seq(vec![vec![30.0]]);
        let soft = soft_tokenize(&s, &cb).unwrap();
        let arg = (0..4).max_by(|&a, &b| soft.rows[0][a].partial_cmp(&soft.rows[0][b]).unwrap());
        assert_eq!(arg, Some(3));
    }

    #[test]
    fn soft_tokens_match_scalar_formula() {
        let cb = Codebook::new(vec![vec![0.0, 1.0], vec![1.0, 0.0], vec![-0.5, -0.5]]).unwrap();
        let frames = vec![vec![0.2, 0.4], vec![1.1, -0.3], vec![-0.9, 0.0], vec![0.5, 0.5]];
        let s = seq(frames.clone());
        let soft = soft_tokenize(&s, &cb).unwrap();
        for (f, row) in frames.iter().zip(&soft.rows) {
            let e: Vec<f64> = cb
                .centroids()
                .iter()
                .map(|c| (-((f[0] - c[0]).powi(2) + (f[1] - c[1]).powi(2)).sqrt()).exp())
                .collect();
            let z: f64 = e.iter().sum();
            for (got, want) in row.iter().zip(e.iter().map(|x| x / z)) {
                assert!((got - want).abs() < 1e-14, "{got} vs {want}");
            }
        }
    }

    #[test]
    fn dimension_mismatch_is_reported() {
        let cb = Codebook::new(vec![vec![0.0, 0.0], vec![1.0, 1.0]]).unwrap();
        let s = seq(vec![vec![0.0, 0.0, 0.0]]);
        assert!(matches!(hard_tokenize(&s, &cb), Err(Error::DimensionMismatch { .. })));
        assert!(matches!(soft_tokenize(&s, &cb), Err(Error::DimensionMismatch { .. })));
    }

    #[test]
    fn rle_examples() {
        let t = |v: &[u32]| HardTranscript::new(v.iter().map(|&x| Token(x)).collect());
        let pairs = |r: TokenRunSequence| -> Vec<(u32, usize)> {
            r.runs.iter().map(|r| (r.token.0, r.len)).collect()
        };
        assert_eq!(pairs(rle_compress(&t(&[0, 0, 0, 1, 1]))), vec![(0, 3), (1, 2)]);
        assert!(rle_compress(&t(&[])).runs.is_empty());
        assert_eq!(pairs(rle_compress(&t(&[2]))), vec![(2, 1)]);
    }

    #[test]
    fn short_runs_are_absorbed() {
        let t = HardTranscript::new(
            [0, 0, 0, 0, 1, 0, 0, 0, 2, 2, 2, 2].iter().map(|&x| Token(x)).collect(),
        );
        let runs = absorb_short_runs(&rle_compress(&t), 2);
        let pairs: Vec<(u32, usize, usize)> =
            runs.runs.iter().map(|r| (r.token.0, r.start, r.len)).collect();
        assert_eq!(pairs, vec![(0, 0, 8), (2, 8, 4)]);
        assert_eq!(runs.total_len(), 12);
    }

    #[test]
    fn auto_k_finds_planted_cluster_count() {
        let centers = [[0.0, 0.0], [8.0, 0.0], [0.0, 8.0], [8.0, 8.0], [16.0, 0.0], [16.0, 16.0], [4.0, 20.0]];
        let mut frames = Vec::new();
        for i in 0..140 {
            let c = centers[i % centers.len()];
            let jitter = libm::sin(i as f64 * 12.9898) * 0.2;
            frames.push(vec![c[0] + jitter, c[1] - jitter]);
        }
        let s = seq(frames);
        assert_eq!(auto_k(&s, 6, 14, 1).unwrap(), 7);
    }
}
