//! Acceptance suite. Each criterion prints one PASS/FAIL line with its
//! measured values and wall time; the test fails if any criterion does.

mod common;

use std::io::Write;
use std::path::Path;
use std::time::{Duration, Instant};

use loopwork::batch::evaluate_generated;
use loopwork::formats::write_json;
use loopwork_core::datagen::{generate_suite, generate_task_suite, Tier};
use loopwork_core::metrics::{hungarian, EvalReport};
use loopwork_core::model::{Slot, Task};
use loopwork_core::mta::{mta_align, AlignConfig};
use loopwork_core::period::{dtw_distance, marginal_spectrum, WindowToken};
use loopwork_core::stream::{detect_periods, remaining_from, step, StreamConfig, StreamState};
use loopwork_core::tokenizer::{hard_tokenize, rle_compress, soft_tokenize};
use loopwork_core::{Codebook, Config, FeatureSequence, HardTranscript, SoftTranscript, Token, Workflow};
use proptest::prelude::*;
use proptest::test_runner::{Config as RunnerConfig, RngAlgorithm, TestRng, TestRunner};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

const SUITE_SEED: u64 = 20_240_601;

struct Outcome {
    id: u32,
    title: &'static str,
    passed: bool,
    detail: String,
    elapsed: Duration,
    limit: Duration,
}

fn criterion(id: u32, title: &'static str, limit_secs: u64, body: impl FnOnce() -> Result<String, String>) -> Outcome {
    let start = Instant::now();
    let result = body();
    let elapsed = start.elapsed();
    let limit = Duration::from_secs(limit_secs);
    let (mut passed, mut detail) = match result {
        Ok(d) => (true, d),
        Err(d) => (false, d),
    };
    if elapsed >= limit {
        passed = false;
        detail = format!("{detail}; over the {limit_secs} s budget");
    }
    Outcome { id, title, passed, detail, elapsed, limit }
}

fn tokens(s: &[u32]) -> Vec<Token> {
    s.iter().map(|&t| Token(t)).collect()
}

fn joint(m: usize) -> AlignConfig {
    AlignConfig { max_joint: m, ..AlignConfig::default() }
}

fn c1_mta_pairs() -> Result<String, String> {
    let strings = common::all_strings(3, 6);
    let cfg = joint(2);
    let mut checked = 0usize;
    for a in &strings {
        for b in &strings {
            let got = mta_align(&[tokens(a), tokens(b)], &cfg).map_err(|e| e.to_string())?.score;
            let want = common::classical_nw(a, b);
            if (got - want).abs() > 1e-9 {
                return Err(format!("{a:?} vs {b:?}: dp {got}, oracle {want}"));
            }
            checked += 1;
        }
    }
    // full path enumeration wherever it is affordable
    let short = common::all_strings(3, 4);
    let mut enumerated = 0usize;
    for a in &short {
        for b in &short {
            let got = mta_align(&[tokens(a), tokens(b)], &cfg).map_err(|e| e.to_string())?.score;
            let want = common::brute_force_alignment(&[a.clone(), b.clone()]);
            if (got - want).abs() > 1e-9 {
                return Err(format!("{a:?} vs {b:?}: dp {got}, enumeration {want}"));
            }
            enumerated += 1;
        }
    }
    Ok(format!("{checked} pairs match the recursion oracle, {enumerated} match path enumeration"))
}

fn random_string(rng: &mut ChaCha8Rng, max_len: usize) -> Vec<u32> {
    let len = rng.random_range(1..=max_len);
    (0..len).map(|_| rng.random_range(0..3)).collect()
}

fn c2_mta_triples() -> Result<String, String> {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let cfg = joint(3);
    for case in 0..200 {
        let ts: Vec<Vec<u32>> = (0..3).map(|_| random_string(&mut rng, 4)).collect();
        let input: Vec<Vec<Token>> = ts.iter().map(|t| tokens(t)).collect();
        let got = mta_align(&input, &cfg).map_err(|e| e.to_string())?.score;
        let want = common::brute_force_alignment(&ts);
        if (got - want).abs() > 1e-9 {
            return Err(format!("case {case} {ts:?}: dp {got}, enumeration {want}"));
        }
    }
    Ok("200 triples match path enumeration".into())
}

fn c3_spectrum() -> Result<String, String> {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let mut worst = 0.0f64;
    for case in 0..100 {
        let t_len = rng.random_range(2..=32);
        let k = rng.random_range(1..=6);
        let rows: Vec<Vec<f64>> = (0..t_len).map(|_| (0..k).map(|_| rng.random::<f64>()).collect()).collect();
        let got = marginal_spectrum(&SoftTranscript { rows: rows.clone() }).map_err(|e| e.to_string())?.mags;
        let want = common::direct_marginal_spectrum(&rows);
        let scale = want.iter().copied().fold(0.0, f64::max);
        for (v, (g, w)) in got.iter().zip(&want).enumerate() {
            let rel = (g - w).abs() / scale;
            worst = worst.max(rel);
            if rel > 1e-9 {
                return Err(format!("case {case} (T={t_len}, K={k}) v={v}: {g} vs {w}"));
            }
        }
    }
    Ok(format!("100 inputs, worst relative deviation {worst:.2e}"))
}

fn c4_dtw() -> Result<String, String> {
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    for size in [3usize, 4] {
        for case in 0..50 {
            let mut series = || -> Vec<Vec<f64>> {
                (0..size).map(|_| (0..2).map(|_| rng.random_range(-1.0..1.0)).collect()).collect()
            };
            let (a, b) = (series(), series());
            let got = dtw_distance(&a, &b, None).map_err(|e| e.to_string())?;
            let want = common::dtw_by_paths(&a, &b);
            if got != want {
                return Err(format!("{size}x{size} case {case}: {got} vs {want}"));
            }
        }
    }
    Ok("50 instances each of 3x3 and 4x4 match exactly".into())
}

fn c5_hungarian() -> Result<String, String> {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    for case in 0..100 {
        let (r, c) = (rng.random_range(1..=6), rng.random_range(1..=6));
        let m: Vec<Vec<f64>> = (0..r).map(|_| (0..c).map(|_| rng.random::<f64>()).collect()).collect();
        let pairs = hungarian(&m);
        let mut rows: Vec<usize> = pairs.iter().map(|p| p.0).collect();
        let mut cols: Vec<usize> = pairs.iter().map(|p| p.1).collect();
        rows.dedup();
        cols.sort_unstable();
        cols.dedup();
        if pairs.len() != r.min(c) || rows.len() != pairs.len() || cols.len() != pairs.len() {
            return Err(format!("case {case}: {pairs:?} is not a full one-to-one assignment"));
        }
        let got: f64 = pairs.iter().map(|&(i, j)| m[i][j]).sum();
        let want = common::assignment_by_permutations(&m);
        if (got - want).abs() > 1e-9 {
            return Err(format!("case {case} ({r}x{c}): {got} vs {want}"));
        }
    }
    Ok("100 matrices match permutation search".into())
}

fn show(x: Option<f64>) -> String {
    x.map_or_else(|| "n/a".into(), |v| format!("{v:.4}"))
}

/// Runs criterion 6's suite and writes its report under `dir`.
fn clean_run(dir: &Path) -> Result<EvalReport, String> {
    let suite = generate_suite(Tier::Clean, 50, SUITE_SEED).map_err(|e| e.to_string())?;
    let report = evaluate_generated(&suite, &Config::default()).map_err(|e| e.to_string())?;
    write_json(&dir.join("clean.json"), &report).map_err(|e| e.to_string())?;
    Ok(report)
}

fn c6_clean(dir: &Path) -> Result<String, String> {
    let r = clean_run(dir)?;
    let detail = format!(
        "MAPE {} (<= 0.05), tIoU_period {} (>= 0.90), MAE {} (<= 0.15), tIoU_anomaly {} (>= 0.40)",
        show(r.mape),
        show(r.tiou_period),
        show(r.mae),
        show(r.tiou_anomaly)
    );
    let ok = r.mape.is_some_and(|v| v <= 0.05)
        && r.tiou_period.is_some_and(|v| v >= 0.90)
        && r.mae.is_some_and(|v| v <= 0.15)
        && r.tiou_anomaly.is_some_and(|v| v >= 0.40);
    if ok {
        Ok(detail)
    } else {
        Err(detail)
    }
}

/// Runs criterion 7's three arms and writes their reports under `dir`.
fn ablation_run(dir: &Path) -> Result<[f64; 3], String> {
    let suite = generate_task_suite(Tier::Overlapping, Task::Period, 30, SUITE_SEED).map_err(|e| e.to_string())?;
    let default = Config::default();
    let mut hard = Config::default();
    hard.period.window_token = WindowToken::Hard;
    let mut no_rerank = Config::default();
    no_rerank.period.rerank = false;
    let mut out = [0.0; 3];
    for (i, (name, cfg)) in [("default", default), ("hard", hard), ("no_rerank", no_rerank)].iter().enumerate() {
        let report = evaluate_generated(&suite, cfg).map_err(|e| e.to_string())?;
        write_json(&dir.join(format!("ablation_{name}.json")), &report).map_err(|e| e.to_string())?;
        out[i] = report.tiou_period.ok_or("no period instances")?;
    }
    Ok(out)
}

fn c7_ablation(dir: &Path) -> Result<String, String> {
    let [soft, hard, no_rerank] = ablation_run(dir)?;
    let detail = format!("tIoU_period soft {soft:.4} vs hard {hard:.4}; default {soft:.4} vs no-rerank {no_rerank:.4}");
    if soft > hard && soft > no_rerank {
        Ok(detail)
    } else {
        Err(detail)
    }
}

fn runner() -> TestRunner {
    let config = RunnerConfig { cases: 256, failure_persistence: None, ..RunnerConfig::default() };
    TestRunner::new_with_rng(config, TestRng::deterministic_rng(RngAlgorithm::ChaCha))
}

fn sequence_and_codebook() -> impl Strategy<Value = (FeatureSequence, Codebook)> {
    (1usize..4, 2usize..7, 1usize..30).prop_flat_map(|(n, k, t)| {
        (
            prop::collection::vec(prop::collection::vec(-10.0f64..10.0, n), t),
            prop::collection::vec(prop::collection::vec(-10.0f64..10.0, n), k),
        )
            .prop_map(|(frames, cents)| {
                (FeatureSequence::new("p", frames, 1.0).unwrap(), Codebook::new(cents).unwrap())
            })
    })
}

fn transcripts(m: std::ops::RangeInclusive<usize>, max_len: usize) -> impl Strategy<Value = Vec<Vec<Token>>> {
    prop::collection::vec(prop::collection::vec((0u32..3).prop_map(Token), 1..=max_len), m)
}

/// A workflow whose slots hold distinct tokens, some skippable after the
/// first, plus one realization of a single period of it.
fn workflow_and_period() -> impl Strategy<Value = (Workflow, Vec<Token>)> {
    (2usize..7)
        .prop_flat_map(|len| {
            (
                Just(len),
                prop::collection::vec(any::<bool>(), len),
                prop::collection::vec(1.0f64..8.0, len),
                prop::collection::vec(1usize..8, len),
                prop::collection::vec(any::<bool>(), len),
            )
        })
        .prop_map(|(len, skip, means, frames, take)| {
            let slots: Vec<Slot> = (0..len)
                .map(|j| Slot {
                    alternatives: vec![Token(j as u32)],
                    skippable: j > 0 && skip[j],
                    mean_duration: means[j],
                    duration_var: 0.0,
                })
                .collect();
            let mut period = Vec::new();
            for j in 0..len {
                if j > 0 && skip[j] && !take[j] {
                    continue;
                }
                period.extend(std::iter::repeat_n(Token(j as u32), frames[j]));
            }
            (Workflow::new(slots, Token(0)).unwrap(), period)
        })
}

fn c8_invariants() -> Result<String, String> {
    let mut done = Vec::new();
    let mut check = |name: &str, result: Result<(), String>| -> Result<(), String> {
        result.map_err(|e| format!("{name}: {e}"))?;
        done.push(name.to_string());
        Ok(())
    };

    check(
        "soft rows sum to one",
        runner()
            .run(&sequence_and_codebook(), |(seq, cb)| {
                for row in soft_tokenize(&seq, &cb).unwrap().rows {
                    prop_assert!((row.iter().sum::<f64>() - 1.0).abs() < 1e-12);
                    prop_assert!(row.iter().all(|&p| p > 0.0));
                }
                Ok(())
            })
            .map_err(|e| e.to_string()),
    )?;
    check(
        "hard token is the soft argmax",
        runner()
            .run(&sequence_and_codebook(), |(seq, cb)| {
                let soft = soft_tokenize(&seq, &cb).unwrap();
                let hard = hard_tokenize(&seq, &cb).unwrap();
                for (row, tok) in soft.rows.iter().zip(&hard.tokens) {
                    let best = row.iter().copied().fold(f64::NEG_INFINITY, f64::max);
                    let argmax = row.iter().position(|&p| p == best).unwrap();
                    prop_assert_eq!(argmax, tok.index());
                }
                Ok(())
            })
            .map_err(|e| e.to_string()),
    )?;
    check(
        "run-length round trip",
        runner()
            .run(&prop::collection::vec((0u32..4).prop_map(Token), 0..60), |toks| {
                let hard = HardTranscript::new(toks);
                let runs = rle_compress(&hard);
                prop_assert_eq!(&runs.expand(), &hard);
                prop_assert!(runs.runs.windows(2).all(|w| w[0].token != w[1].token));
                Ok(())
            })
            .map_err(|e| e.to_string()),
    )?;
    check(
        "gap removal restores every transcript",
        runner()
            .run(&transcripts(2..=4, 5), |ts| {
                let al = mta_align(&ts, &joint(4)).unwrap();
                for (i, t) in ts.iter().enumerate() {
                    prop_assert_eq!(&al.ungapped(i), t);
                }
                Ok(())
            })
            .map_err(|e| e.to_string()),
    )?;
    check(
        "score is invariant under input order",
        runner()
            .run(&(transcripts(2..=4, 5), any::<prop::sample::Index>()), |(ts, idx)| {
                let base = mta_align(&ts, &joint(4)).unwrap().score;
                let mut shuffled = ts.clone();
                let r = idx.index(shuffled.len());
                shuffled.rotate_left(r);
                let last = shuffled.len() - 1;
                shuffled.swap(0, last);
                prop_assert!((mta_align(&shuffled, &joint(4)).unwrap().score - base).abs() < 1e-9);
                Ok(())
            })
            .map_err(|e| e.to_string()),
    )?;
    check(
        "remaining share never grows within a period",
        runner()
            .run(&workflow_and_period(), |(wf, period)| {
                let cfg = StreamConfig::default();
                let mut state = StreamState::new(&wf);
                let mut last = 1.0f64;
                for &tok in &period {
                    state = step(state, tok, &wf, &cfg);
                    let z = remaining_from(&state, &wf).unwrap();
                    prop_assert!((0.0..=1.0).contains(&z));
                    prop_assert!(z <= last + 1e-12, "{} after {}", z, last);
                    last = z;
                }
                Ok(())
            })
            .map_err(|e| e.to_string()),
    )?;
    check(
        "period boundaries are ordered and disjoint",
        runner()
            .run(
                &(workflow_and_period(), prop::collection::vec((0u32..8).prop_map(Token), 0..120)),
                |((wf, _), stream)| {
                    let n = stream.len() as f64;
                    let seg = detect_periods(&HardTranscript::new(stream), &wf, &StreamConfig::default());
                    for b in &seg.boundaries {
                        prop_assert!(b.start() >= 0.0 && b.start() < b.end() && b.end() <= n);
                    }
                    prop_assert!(seg.boundaries.windows(2).all(|w| w[0].end() <= w[1].start()));
                    Ok(())
                },
            )
            .map_err(|e| e.to_string()),
    )?;
    Ok(format!("{} properties x 256 cases", done.len()))
}

fn c9_determinism(first: &Path, second: &Path) -> Result<String, String> {
    clean_run(second)?;
    ablation_run(second)?;
    let mut compared = 0;
    for name in ["clean.json", "ablation_default.json", "ablation_hard.json", "ablation_no_rerank.json"] {
        let a = std::fs::read(first.join(name)).map_err(|e| format!("{name}: {e}"))?;
        let b = std::fs::read(second.join(name)).map_err(|e| format!("{name}: {e}"))?;
        if a != b {
            return Err(format!("{name} differs between runs"));
        }
        compared += 1;
    }
    Ok(format!("{compared} report files byte-identical"))
}

#[test]
fn acceptance() {
    let first = tempfile::tempdir().unwrap();
    let second = tempfile::tempdir().unwrap();
    let outcomes = vec![
        criterion(1, "MTA exactness, m=2", 60, c1_mta_pairs),
        criterion(2, "MTA exactness, m=3", 120, c2_mta_triples),
        criterion(3, "spectrum fidelity", 30, c3_spectrum),
        criterion(4, "DTW fidelity", 10, c4_dtw),
        criterion(5, "Hungarian optimality", 10, c5_hungarian),
        criterion(6, "pipeline, clean tier", 300, || c6_clean(first.path())),
        criterion(7, "ablation trend", 300, || c7_ablation(first.path())),
        criterion(8, "invariant suites", 120, c8_invariants),
        criterion(9, "determinism", 600, || c9_determinism(first.path(), second.path())),
    ];
    // written past the test harness capture so the lines always show
    let mut stdout = std::io::stdout().lock();
    for o in &outcomes {
        writeln!(
            stdout,
            "criterion {} [{}] {}: {} ({:.1} s of {} s)",
            o.id,
            if o.passed { "PASS" } else { "FAIL" },
            o.title,
            o.detail,
            o.elapsed.as_secs_f64(),
            o.limit.as_secs()
        )
        .unwrap();
    }
    let failed: Vec<u32> = outcomes.iter().filter(|o| !o.passed).map(|o| o.id).collect();
    assert!(failed.is_empty(), "failed criteria: {failed:?}");
}
