//! Synthetic periodic sequences with known workflows.
//!
//! Each workflow token owns a centroid in `R^n`; frames are the centroid of
//! the active token plus Gaussian noise. Centroids are placed by rejection
//! sampling so that any two are at least `gap` apart, and noise is scaled
//! by that gap.

use alloc::format;
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, LogNormal, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{
    display_tokens, Codebook, FeatureSequence, GroundTruth, HardTranscript, Interval, Task, Token,
};

const PLACEMENT_ATTEMPTS: usize = 10_000;

/// Parameters of one generated sequence.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GenSpec {
    /// Tokens available to the workflow.
    pub k: usize,
    /// Feature dimension.
    pub n: usize,
    pub workflow_len: usize,
    pub periods: usize,
    /// Mean frames per slot.
    pub mean_token_frames: f64,
    /// Log-normal sigma of per-occurrence duration factors.
    pub jitter: f64,
    /// Noise standard deviation as a fraction of the centroid gap.
    pub noise: f64,
    /// Slots (never the first) that draw from two tokens.
    pub branch_slots: Vec<usize>,
    /// Chance of skipping an interior slot in a given period.
    pub skip_prob: f64,
    pub task: Task,
    pub seed: u64,
    #[serde(default = "default_gap")]
    pub gap: f64,
    #[serde(default = "default_frame_rate")]
    pub frame_rate: f64,
}

fn default_gap() -> f64 {
    1.0
}

fn default_frame_rate() -> f64 {
    10.0
}

impl GenSpec {
    pub fn validate(&self) -> Result<()> {
        if self.n == 0 || self.workflow_len < 2 {
            return Err(Error::InvalidSpec("need n >= 1 and at least two slots"));
        }
        if self.workflow_len + self.branch_slots.len() > self.k {
            return Err(Error::InvalidSpec("workflow needs more tokens than k"));
        }
        if self.periods < 3 {
            return Err(Error::InvalidSpec("need at least three periods"));
        }
        if self.branch_slots.iter().any(|&s| s == 0 || s >= self.workflow_len) {
            return Err(Error::InvalidSpec("branch slot out of range"));
        }
        if !(self.mean_token_frames >= 1.0) || !(self.jitter >= 0.0) || !(self.noise >= 0.0) || !(self.gap > 0.0) {
            return Err(Error::InvalidSpec("durations, jitter, noise and gap must be positive"));
        }
        if !(0.0..1.0).contains(&self.skip_prob) || !(self.frame_rate > 0.0) {
            return Err(Error::InvalidSpec("skip_prob must lie in [0, 1)"));
        }
        Ok(())
    }
}

/// A generated instance plus the generator's own view of it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Generated {
    pub sequence: FeatureSequence,
    pub truth: GroundTruth,
    pub spec: GenSpec,
    /// True centroids; index `k` is the foreign anomaly token.
    pub centroids: Codebook,
    /// Noise-free token of every frame.
    pub tokens: HardTranscript,
}

fn place_centroids(count: usize, n: usize, gap: f64, rng: &mut ChaCha8Rng) -> Result<Vec<Vec<f64>>> {
    let side = 2.0 * gap * libm::pow(count as f64, 1.0 / n as f64);
    let mut out: Vec<Vec<f64>> = Vec::with_capacity(count);
    let mut attempts = 0;
    while out.len() < count {
        attempts += 1;
        if attempts > PLACEMENT_ATTEMPTS {
            return Err(Error::CentroidRejectionExhausted);
        }
        let c: Vec<f64> = (0..n).map(|_| rng.random::<f64>() * side).collect();
        let far = out
            .iter()
            .all(|o| o.iter().zip(&c).map(|(a, b)| (a - b) * (a - b)).sum::<f64>() >= gap * gap);
        if far {
            out.push(c);
        }
    }
    Ok(out)
}

/// Builds one sequence and its ground truth.
pub fn generate(spec: &GenSpec, id: &str) -> Result<Generated> {
    spec.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let centroids = place_centroids(spec.k + 1, spec.n, spec.gap, &mut rng)?;
    let mut perm: Vec<u32> = (0..spec.k as u32).collect();
    perm.shuffle(&mut rng);
    let main: Vec<Token> = perm[..spec.workflow_len].iter().map(|&t| Token(t)).collect();
    let mut branch: Vec<Option<Token>> = vec![None; spec.workflow_len];
    for (i, &s) in spec.branch_slots.iter().enumerate() {
        branch[s] = Some(Token(perm[spec.workflow_len + i]));
    }
    let foreign = Token(spec.k as u32);
    let base: Vec<f64> = (0..spec.workflow_len)
        .map(|_| spec.mean_token_frames * rng.random_range(0.6..1.4))
        .collect();
    let factor = LogNormal::new(-spec.jitter * spec.jitter / 2.0, spec.jitter)
        .map_err(|_| Error::InvalidSpec("bad jitter"))?;

    let mut tokens: Vec<Token> = Vec::new();
    let mut bounds: Vec<(usize, usize)> = Vec::new();
    for _ in 0..spec.periods {
        let start = tokens.len();
        for j in 0..spec.workflow_len {
            let interior = j > 0 && j + 1 < spec.workflow_len;
            if interior && spec.skip_prob > 0.0 && rng.random::<f64>() < spec.skip_prob {
                continue;
            }
            let tok = match branch[j] {
                Some(alt) if rng.random::<bool>() => alt,
                _ => main[j],
            };
            let f = if spec.jitter > 0.0 { factor.sample(&mut rng) } else { 1.0 };
            let len = (libm::round(base[j] * f) as usize).max(1);
            tokens.extend(core::iter::repeat_n(tok, len));
        }
        bounds.push((start, tokens.len()));
    }

    let mut anomaly = None;
    let mut remaining = None;
    match spec.task {
        Task::Period => {}
        Task::Completion => {
            // the second-last period is cut short and the final one never starts
            let (s, _) = bounds.pop().expect("periods >= 3");
            tokens.truncate(s);
            let (s, e) = bounds.pop().expect("periods >= 3");
            let len = e - s;
            let emitted = (libm::round(rng.random::<f64>() * len as f64) as usize).clamp(1, len - 1);
            tokens.truncate(s + emitted);
            bounds.push((s, s + emitted));
            remaining = Some(1.0 - emitted as f64 / len as f64);
        }
        Task::Anomaly => {
            let (s, e) = bounds.pop().expect("periods >= 3");
            let len = e - s;
            let alen = (libm::round(rng.random_range(0.10..0.20) * len as f64) as usize).max(1);
            let at = s + rng.random_range(1..len);
            tokens.splice(at..at, core::iter::repeat_n(foreign, alen));
            bounds.push((s, e + alen));
            anomaly = Some(Interval::frames(at, at + alen)?);
        }
    }

    let frames: Vec<Vec<f64>> = tokens
        .iter()
        .map(|t| {
            centroids[t.index()]
                .iter()
                .map(|&c| {
                    let z: f64 = StandardNormal.sample(&mut rng);
                    c + spec.noise * spec.gap * z
                })
                .collect()
        })
        .collect();
    let sequence = FeatureSequence::new(id, frames, spec.frame_rate)?;
    let workflow = workflow_display(&main, &branch, spec.skip_prob > 0.0);
    let truth = GroundTruth {
        id: String::from(id),
        task: spec.task,
        boundaries: bounds.iter().map(|&(s, e)| Interval::frames(s, e)).collect::<Result<_>>()?,
        workflow,
        anomaly,
        remaining,
    };
    Ok(Generated {
        sequence,
        truth,
        spec: spec.clone(),
        centroids: Codebook::new(centroids)?,
        tokens: HardTranscript::new(tokens),
    })
}

fn workflow_display(main: &[Token], branch: &[Option<Token>], skips: bool) -> String {
    let parts: Vec<String> = main
        .iter()
        .zip(branch)
        .enumerate()
        .map(|(j, (&m, &b))| {
            let skip = if skips && j > 0 && j + 1 < main.len() { "_" } else { "" };
            match b {
                Some(b) => {
                    let (x, y) = if m < b { (m, b) } else { (b, m) };
                    format!("{skip}[{x}|{y}]")
                }
                None => format!("{skip}{}", display_tokens(&[m])),
            }
        })
        .collect();
    parts.join(" ")
}

/// Difficulty tiers of the synthetic benchmark.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Tier {
    Clean,
    Jittered,
    Noisy,
    /// Noisy tier with the centroid gap halved, so neighboring clusters
    /// overlap.
    Overlapping,
}

impl Tier {
    /// `(jitter, noise, gap, branches allowed)`.
    fn params(self) -> (f64, f64, f64, bool) {
        match self {
            Tier::Clean => (0.05, 0.05, 1.0, false),
            Tier::Jittered => (0.2, 0.1, 1.0, true),
            Tier::Noisy => (0.3, 0.25, 1.0, true),
            // same absolute noise as Noisy, half the gap
            Tier::Overlapping => (0.3, 0.5, 0.5, true),
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Tier::Clean => "clean",
            Tier::Jittered => "jittered",
            Tier::Noisy => "noisy",
            Tier::Overlapping => "overlapping",
        }
    }
}

/// Draws a spec from the tier's parameter ranges.
pub fn sample_spec(tier: Tier, task: Task, rng: &mut ChaCha8Rng) -> GenSpec {
    let (jitter, noise, gap, branches) = tier.params();
    let k = rng.random_range(6..=14);
    let branch_slots = if branches && rng.random::<bool>() {
        vec![rng.random_range(1..k - 1)]
    } else {
        Vec::new()
    };
    GenSpec {
        k,
        n: 3,
        workflow_len: k - branch_slots.len(),
        periods: rng.random_range(5..=8),
        mean_token_frames: rng.random_range(6.0..12.0),
        jitter,
        noise,
        branch_slots,
        skip_prob: 0.0,
        task,
        seed: rng.random(),
        gap,
        frame_rate: 10.0,
    }
}

/// `count` instances cycling through the three tasks.
pub fn generate_suite(tier: Tier, count: usize, seed: u64) -> Result<Vec<Generated>> {
    let tasks = [Task::Period, Task::Completion, Task::Anomaly];
    suite(tier, count, seed, |i| tasks[i % 3])
}

/// `count` instances of a single task.
pub fn generate_task_suite(tier: Tier, task: Task, count: usize, seed: u64) -> Result<Vec<Generated>> {
    suite(tier, count, seed, |_| task)
}

fn suite(tier: Tier, count: usize, seed: u64, task: impl Fn(usize) -> Task) -> Result<Vec<Generated>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..count)
        .map(|i| {
            let spec = sample_spec(tier, task(i), &mut rng);
            generate(&spec, &format!("{}-{i:04}", tier.name()))
        })
        .collect()
}
