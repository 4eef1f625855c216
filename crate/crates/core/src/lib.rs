//! Training-free mining of long-term periodic workflows.
//!
//! The crate turns a multivariate feature sequence into a symbolic
//! transcript, estimates the period window from a context-marginalized 2D
//! spectrum, aligns buffered period segments with a multi-dimensional
//! Needleman–Wunsch style dynamic program, and distills a multi-branch
//! [`Workflow`](model::Workflow). The mined workflow then drives online
//! period counting, completion tracking and anomaly localization.
//!
//! Everything here is `no_std` + `alloc`; file formats and the command-line
//! front end live in the `loopwork` crate.

#![cfg_attr(not(feature = "std"), no_std)]

extern crate alloc;
#[cfg(test)]
extern crate std;

pub mod datagen;
pub mod error;
pub mod fft;
pub mod metrics;
pub mod miner;
pub mod model;
pub mod mta;
pub mod period;
pub mod pipeline;
pub mod stream;
pub mod tokenizer;

pub use error::{Error, Result};
pub use model::{
    Codebook, FeatureSequence, GroundTruth, HardTranscript, Interval, PeriodSegmentation, Slot,
    SoftTranscript, Token, TokenRun, TokenRunSequence, Workflow,
};
pub use pipeline::{analyze, Analysis, Config, KChoice};
