//! Independent reference implementations used as test oracles. Nothing here
//! calls into the code under test.

#![allow(dead_code)]

use std::f64::consts::PI;

/// Column score written from the definition: any gap costs one per gap,
/// otherwise count equal ordered pairs and subtract the column height.
pub fn column_score(col: &[Option<u32>]) -> f64 {
    let gaps = col.iter().filter(|c| c.is_none()).count();
    if gaps > 0 {
        return -(gaps as f64);
    }
    let mut pairs = 0usize;
    for i in 0..col.len() {
        for j in 0..col.len() {
            if col[i] == col[j] {
                pairs += 1;
            }
        }
    }
    pairs as f64 - col.len() as f64
}

/// Preset value of an edge cell that lies on axis `axis` at coordinate `c`:
/// `c`-th of `len + 1` evenly spaced values from 0 to `-m (len + 1)`.
fn edge_value(m: usize, len: usize, c: usize) -> f64 {
    let d = (len + 1) as f64;
    -(m as f64) * d * c as f64 / (d - 1.0)
}

/// Best score over every monotone path from the origin to the far corner,
/// enumerated one path at a time.
///
/// A path's score is the preset value of the last edge cell it visits (a
/// cell with at most one nonzero coordinate) plus the column scores of all
/// later moves. This is the objective the dynamic program optimizes with its
/// edge profile.
pub fn brute_force_alignment(ts: &[Vec<u32>]) -> f64 {
    let m = ts.len();
    let lens: Vec<usize> = ts.iter().map(Vec::len).collect();
    let mut pos = vec![0usize; m];
    let mut best = f64::NEG_INFINITY;
    walk(ts, &lens, &mut pos, 0.0, &mut best);
    best
}

fn on_edge(pos: &[usize]) -> bool {
    pos.iter().filter(|&&p| p > 0).count() <= 1
}

fn walk(ts: &[Vec<u32>], lens: &[usize], pos: &mut Vec<usize>, score: f64, best: &mut f64) {
    let m = ts.len();
    if pos.iter().zip(lens).all(|(p, l)| p == l) {
        if score > *best {
            *best = score;
        }
        return;
    }
    for mask in 1u32..(1 << m) {
        if (0..m).any(|j| mask & (1 << j) != 0 && pos[j] == lens[j]) {
            continue;
        }
        let col: Vec<Option<u32>> = (0..m)
            .map(|j| if mask & (1 << j) != 0 { Some(ts[j][pos[j]]) } else { None })
            .collect();
        for j in 0..m {
            if mask & (1 << j) != 0 {
                pos[j] += 1;
            }
        }
        let next = if on_edge(pos) {
            match (0..m).find(|&j| pos[j] > 0) {
                Some(axis) => edge_value(m, lens[axis], pos[axis]),
                None => 0.0,
            }
        } else {
            score + column_score(&col)
        };
        walk(ts, lens, pos, next, best);
        for j in 0..m {
            if mask & (1 << j) != 0 {
                pos[j] -= 1;
            }
        }
    }
}

/// Textbook two-sequence global alignment (match +2, mismatch 0, gap -1)
/// with the evenly spaced edge profile, written as a memoized recursion.
pub fn classical_nw(a: &[u32], b: &[u32]) -> f64 {
    let (n, m) = (a.len(), b.len());
    let mut memo = vec![vec![None; m + 1]; n + 1];
    fn go(i: usize, j: usize, a: &[u32], b: &[u32], memo: &mut Vec<Vec<Option<f64>>>) -> f64 {
        if let Some(v) = memo[i][j] {
            return v;
        }
        let v = if i == 0 {
            edge_value(2, b.len(), j)
        } else if j == 0 {
            edge_value(2, a.len(), i)
        } else {
            let sub = if a[i - 1] == b[j - 1] { 2.0 } else { 0.0 };
            (go(i - 1, j - 1, a, b, memo) + sub)
                .max(go(i - 1, j, a, b, memo) - 1.0)
                .max(go(i, j - 1, a, b, memo) - 1.0)
        };
        memo[i][j] = Some(v);
        v
    }
    go(n, m, a, b, &mut memo)
}

/// `sum_u |sum_t sum_k x[t][k] exp(-2 pi i (u k / K + v t / T))|` for every
/// `v`, straight from the double sum.
pub fn direct_marginal_spectrum(rows: &[Vec<f64>]) -> Vec<f64> {
    let t_len = rows.len();
    let k = rows[0].len();
    (0..t_len)
        .map(|v| {
            (0..k)
                .map(|u| {
                    let (mut re, mut im) = (0.0, 0.0);
                    for (t, row) in rows.iter().enumerate() {
                        for (kk, &x) in row.iter().enumerate() {
                            let ang = -2.0 * PI * ((u * kk) as f64 / k as f64 + (v * t) as f64 / t_len as f64);
                            re += x * ang.cos();
                            im += x * ang.sin();
                        }
                    }
                    (re * re + im * im).sqrt()
                })
                .sum()
        })
        .collect()
}

fn euclid(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>().sqrt()
}

/// Minimum summed Euclidean cost over every warping path from `(0, 0)` to
/// `(n-1, m-1)` with unit right, down and diagonal steps.
pub fn dtw_by_paths(a: &[Vec<f64>], b: &[Vec<f64>]) -> f64 {
    fn go(i: usize, j: usize, a: &[Vec<f64>], b: &[Vec<f64>], acc: f64, best: &mut f64) {
        let acc = acc + euclid(&a[i], &b[j]);
        if i + 1 == a.len() && j + 1 == b.len() {
            *best = best.min(acc);
            return;
        }
        if i + 1 < a.len() {
            go(i + 1, j, a, b, acc, best);
        }
        if j + 1 < b.len() {
            go(i, j + 1, a, b, acc, best);
        }
        if i + 1 < a.len() && j + 1 < b.len() {
            go(i + 1, j + 1, a, b, acc, best);
        }
    }
    let mut best = f64::INFINITY;
    go(0, 0, a, b, 0.0, &mut best);
    best
}

/// Largest total over every injective map from the smaller side to the
/// larger one.
pub fn assignment_by_permutations(scores: &[Vec<f64>]) -> f64 {
    let rows = scores.len();
    let cols = scores[0].len();
    let (small, large, get): (usize, usize, Box<dyn Fn(usize, usize) -> f64>) = if rows <= cols {
        (rows, cols, Box::new(|i, j| scores[i][j]))
    } else {
        (cols, rows, Box::new(|i, j| scores[j][i]))
    };
    let mut used = vec![false; large];
    let mut best = f64::NEG_INFINITY;
    fn go(i: usize, small: usize, used: &mut Vec<bool>, acc: f64, get: &dyn Fn(usize, usize) -> f64, best: &mut f64) {
        if i == small {
            *best = best.max(acc);
            return;
        }
        for j in 0..used.len() {
            if !used[j] {
                used[j] = true;
                go(i + 1, small, used, acc + get(i, j), get, best);
                used[j] = false;
            }
        }
    }
    go(0, small, &mut used, 0.0, &*get, &mut best);
    best
}

/// Every string over `0..alphabet` of length `1..=max_len`.
pub fn all_strings(alphabet: u32, max_len: usize) -> Vec<Vec<u32>> {
    let mut out = Vec::new();
    let mut layer: Vec<Vec<u32>> = vec![Vec::new()];
    for _ in 0..max_len {
        layer = layer
            .iter()
            .flat_map(|s| {
                (0..alphabet).map(move |c| {
                    let mut t = s.clone();
                    t.push(c);
                    t
                })
            })
            .collect();
        out.extend(layer.iter().cloned());
    }
    out
}
