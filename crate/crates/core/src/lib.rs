//! Evaluation of spatiotemporal alignments between spoken words and visual
//! objects.
//!
//! An [`AlignmentTensor`] holds association strengths between every image
//! pixel and every speech frame. Given ground-truth object masks and word
//! timestamps, [`metrics`] computes alignment scores (sustained attention on
//! the target) and glancing scores (cumulative attention on the target) in
//! both the object and the word direction, and [`aggregation`] reduces them to
//! class and dataset totals.

pub mod aggregation;
pub mod avt;
pub mod cli;
pub mod error;
pub mod fixtures;
pub mod ground_truth;
pub mod metrics;
pub mod parallel;
pub mod pipeline;
pub mod report;
pub mod tensor;

pub use error::{Error, Result};
pub use ground_truth::{FrameSet, ObjectMask, SampleGroundTruth, WordSpan};
pub use metrics::{Metric, ScoreRecord, Scores, Upscale};
pub use tensor::{AlignmentTensor, UpsampleMode};
