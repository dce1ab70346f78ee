//! Batch evaluation of ground-truth samples against their tensors.

use std::collections::HashMap;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::avt;
use crate::error::{Error, Result};
use crate::ground_truth::SampleGroundTruth;
use crate::metrics::{confusion_scores, random_baseline_tensor, sample_seed, score_pair, ConfusionCell, Metric, ScoreRecord, Upscale};
use crate::parallel::{map_ordered, Execution};
use crate::tensor::{AlignmentTensor, UpsampleMode};

/// How a tensor smaller than the ground truth is brought to evaluation
/// resolution.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Resolution {
    /// Materialize a nearest-upsampled tensor.
    #[default]
    Nearest,
    /// Materialize a trilinearly upsampled tensor.
    Linear,
    /// Score the tensor in place with fractional block weights; needs integer
    /// factors and matches `Nearest`.
    Coarse,
}

/// Transform applied to the tensor before scoring.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Softmax {
    #[default]
    None,
    Space,
    Time,
}

#[derive(Debug, Clone)]
pub struct EvalOptions {
    pub resolution: Resolution,
    pub softmax: Softmax,
    pub temperature: f32,
    pub metrics: Vec<Metric>,
    pub confusion: bool,
    /// Fail the run on the first missing or invalid tensor.
    pub strict: bool,
    pub execution: Execution,
}

impl Default for EvalOptions {
    fn default() -> Self {
        Self {
            resolution: Resolution::default(),
            softmax: Softmax::default(),
            temperature: 1.0,
            metrics: Metric::ALL.to_vec(),
            confusion: false,
            strict: true,
            execution: Execution::Sequential,
        }
    }
}

/// Supplies the tensor of a sample; `Ok(None)` when it has none.
pub trait TensorSource: Sync {
    fn tensor_for(&self, sample: &SampleGroundTruth) -> Result<Option<AlignmentTensor>>;
}

/// `<dir>/<sample_id>.avt` files.
#[derive(Debug, Clone)]
pub struct DirectorySource {
    dir: PathBuf,
}

impl DirectorySource {
    pub fn new(dir: impl Into<PathBuf>) -> Self {
        Self { dir: dir.into() }
    }

    pub fn path_for(&self, sample_id: &str) -> PathBuf {
        self.dir.join(format!("{sample_id}.avt"))
    }
}

impl TensorSource for DirectorySource {
    fn tensor_for(&self, sample: &SampleGroundTruth) -> Result<Option<AlignmentTensor>> {
        let path = self.path_for(&sample.sample_id);
        if !path.is_file() {
            return Ok(None);
        }
        avt::read(path).map(Some)
    }
}

/// Uniform random tensors seeded per sample. Dimensions follow the sample's
/// tensor file when a directory is given and the file exists, otherwise the
/// ground-truth resolution.
#[derive(Debug, Clone)]
pub struct BaselineSource {
    pub master_seed: u64,
    pub shapes: Option<DirectorySource>,
}

impl TensorSource for BaselineSource {
    fn tensor_for(&self, sample: &SampleGroundTruth) -> Result<Option<AlignmentTensor>> {
        let seed = sample_seed(self.master_seed, &sample.sample_id);
        let header = match &self.shapes {
            Some(dir) => {
                let path = dir.path_for(&sample.sample_id);
                if path.is_file() {
                    Some(avt::read_header(&path).map_err(|e| context(&path, e))?)
                } else {
                    None
                }
            }
            None => None,
        };
        let tensor = match header {
            Some(h) => random_baseline_tensor(h.width, h.height, h.frames, h.frame_ms, seed)?,
            None => random_baseline_tensor(sample.image_width, sample.image_height, sample.frames, sample.frame_ms, seed)?,
        };
        Ok(Some(tensor))
    }
}

fn context(path: &Path, e: Error) -> Error {
    match e {
        Error::Format(m) => Error::Format(format!("{}: {m}", path.display())),
        other => other,
    }
}

/// Tensors held in memory, keyed by sample id.
#[derive(Debug, Clone, Default)]
pub struct MemorySource(pub HashMap<String, AlignmentTensor>);

impl TensorSource for MemorySource {
    fn tensor_for(&self, sample: &SampleGroundTruth) -> Result<Option<AlignmentTensor>> {
        Ok(self.0.get(&sample.sample_id).cloned())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ConfusionRecord {
    pub sample_id: String,
    #[serde(flatten)]
    pub cell: ConfusionCell,
}

#[derive(Debug, Default)]
pub struct EvalOutcome {
    /// Sorted by sample id, ground-truth order within a sample.
    pub records: Vec<ScoreRecord>,
    pub confusion: Vec<ConfusionRecord>,
    pub samples_scored: usize,
    /// Samples without a tensor (lenient mode).
    pub missing: Vec<String>,
    /// Samples whose tensor could not be used (lenient mode).
    pub failed: Vec<(String, String)>,
}

enum SampleResult {
    Scored(Vec<ScoreRecord>, Vec<ConfusionRecord>),
    Missing,
    Failed(String),
}

/// Brings `tensor` to the sample's resolution, or returns the factors for
/// scoring it in place.
fn prepare(tensor: AlignmentTensor, sample: &SampleGroundTruth, opts: &EvalOptions) -> Result<(AlignmentTensor, Upscale)> {
    let tensor = match opts.softmax {
        Softmax::None => tensor,
        Softmax::Space => tensor.softmax_space(opts.temperature)?,
        Softmax::Time => tensor.softmax_time(opts.temperature)?,
    };
    let target = (sample.image_width, sample.image_height, sample.frames);
    if (tensor.width(), tensor.height(), tensor.frames()) == target {
        return Ok((tensor, Upscale::IDENTITY));
    }
    match opts.resolution {
        Resolution::Coarse => {
            let scale = Upscale::between(&tensor, target.0, target.1, target.2)?;
            Ok((tensor, scale))
        }
        Resolution::Nearest | Resolution::Linear => {
            let mode = if opts.resolution == Resolution::Linear {
                UpsampleMode::Linear
            } else {
                UpsampleMode::Nearest
            };
            Ok((tensor.upsample(target.0, target.1, target.2, mode)?, Upscale::IDENTITY))
        }
    }
}

/// Scores every pair of one sample.
pub fn evaluate_sample(
    tensor: AlignmentTensor,
    sample: &SampleGroundTruth,
    opts: &EvalOptions,
) -> Result<(Vec<ScoreRecord>, Vec<ConfusionRecord>)> {
    let (tensor, scale) = prepare(tensor, sample, opts)?;
    let records = sample
        .entries
        .iter()
        .map(|e| score_pair(&tensor, sample, e, scale, &opts.metrics))
        .collect::<Result<Vec<_>>>()?;
    let mut confusion = Vec::new();
    if opts.confusion {
        for &metric in &opts.metrics {
            confusion.extend(
                confusion_scores(&tensor, sample, metric, scale)?
                    .into_iter()
                    .map(|cell| ConfusionRecord {
                        sample_id: sample.sample_id.clone(),
                        cell,
                    }),
            );
        }
    }
    Ok((records, confusion))
}

pub fn evaluate(samples: &[SampleGroundTruth], source: &dyn TensorSource, opts: &EvalOptions) -> Result<EvalOutcome> {
    let results = map_ordered(samples, opts.execution, |sample| {
        let outcome = source
            .tensor_for(sample)
            .and_then(|t| t.map(|t| evaluate_sample(t, sample, opts)).transpose());
        match outcome {
            Ok(Some((records, confusion))) => SampleResult::Scored(records, confusion),
            Ok(None) => SampleResult::Missing,
            Err(e) => SampleResult::Failed(e.to_string()),
        }
    })?;

    let mut indexed: Vec<(&SampleGroundTruth, SampleResult)> = samples.iter().zip(results).collect();
    indexed.sort_by(|a, b| a.0.sample_id.cmp(&b.0.sample_id));

    let mut out = EvalOutcome::default();
    let mut problems = Vec::new();
    for (sample, result) in indexed {
        match result {
            SampleResult::Scored(records, confusion) => {
                out.samples_scored += 1;
                out.records.extend(records);
                out.confusion.extend(confusion);
            }
            SampleResult::Missing => {
                problems.push(format!("{}: no tensor", sample.sample_id));
                out.missing.push(sample.sample_id.clone());
            }
            SampleResult::Failed(message) => {
                problems.push(format!("{}: {message}", sample.sample_id));
                out.failed.push((sample.sample_id.clone(), message));
            }
        }
    }
    if opts.strict && !problems.is_empty() {
        return Err(Error::Batch(problems));
    }
    for p in &problems {
        log::warn!("skipped sample {p}");
    }
    Ok(out)
}
