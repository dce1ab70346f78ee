//! Alignment and glancing scores.
//!
//! All four scores are computed from a [`Footprint`]: the ground-truth mask
//! and word frames projected onto the cells and frames of the tensor being
//! scored. When the tensor is at evaluation resolution every cell and frame
//! has weight 0 or 1. For a coarse tensor that would be nearest-upsampled by
//! integer factors, a cell's weight is the number of mask pixels in its block
//! and a frame's weight the number of word frames in its block, which gives
//! the same scores as scoring the materialized upsampled tensor.

use std::fmt;
use std::str::FromStr;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::ground_truth::{FrameSet, GtEntry, ObjectMask, SampleGroundTruth};
use crate::tensor::AlignmentTensor;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Metric {
    AsObject,
    AsWord,
    GsObject,
    GsWord,
}

impl Metric {
    pub const ALL: [Metric; 4] = [Metric::AsObject, Metric::AsWord, Metric::GsObject, Metric::GsWord];

    /// Snake-case name used in reports.
    pub fn name(self) -> &'static str {
        match self {
            Metric::AsObject => "as_object",
            Metric::AsWord => "as_word",
            Metric::GsObject => "gs_object",
            Metric::GsWord => "gs_word",
        }
    }

    pub fn index(self) -> usize {
        self as usize
    }
}

impl fmt::Display for Metric {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Metric {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.replace('-', "_").as_str() {
            "as_object" => Ok(Metric::AsObject),
            "as_word" => Ok(Metric::AsWord),
            "gs_object" => Ok(Metric::GsObject),
            "gs_word" => Ok(Metric::GsWord),
            _ => Err(Error::InvalidArgument(format!("unknown metric {s:?}"))),
        }
    }
}

/// Integer nearest-upsampling factors from a coarse tensor to evaluation
/// resolution.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Upscale {
    pub x: usize,
    pub y: usize,
    pub t: usize,
}

impl Upscale {
    pub const IDENTITY: Upscale = Upscale { x: 1, y: 1, t: 1 };

    /// Factors mapping `tensor` onto `width x height x frames`, if they are
    /// all integers.
    pub fn between(tensor: &AlignmentTensor, width: usize, height: usize, frames: usize) -> Result<Self> {
        let factor = |fine: usize, coarse: usize, axis: &str| {
            if fine >= coarse && fine.is_multiple_of(coarse) {
                Ok(fine / coarse)
            } else {
                Err(Error::DimensionMismatch(format!(
                    "{axis}: evaluation size {fine} is not an integer multiple of tensor size {coarse}"
                )))
            }
        };
        Ok(Upscale {
            x: factor(width, tensor.width(), "width")?,
            y: factor(height, tensor.height(), "height")?,
            t: factor(frames, tensor.frames(), "frames")?,
        })
    }
}

/// Mask and word frames projected onto a tensor's cells and frames.
#[derive(Debug, Clone)]
pub struct Footprint {
    /// `(cell index, mask pixels in the cell's block)`, nonzero only.
    cells: Vec<(usize, f64)>,
    /// `(frame index, word frames in the frame's block)`, nonzero only.
    frames: Vec<(usize, f64)>,
    block_pixels: f64,
    block_frames: f64,
    mask_pixels: f64,
    span_frames: f64,
    image_pixels: f64,
    utterance_frames: f64,
}

impl Footprint {
    pub fn new(tensor: &AlignmentTensor, mask: &ObjectMask, span: &FrameSet, scale: Upscale) -> Result<Self> {
        let (fine_w, fine_h, fine_t) = (tensor.width() * scale.x, tensor.height() * scale.y, tensor.frames() * scale.t);
        if (mask.width(), mask.height()) != (fine_w, fine_h) {
            return Err(Error::DimensionMismatch(format!(
                "mask is {}x{}, tensor covers {fine_w}x{fine_h}",
                mask.width(),
                mask.height()
            )));
        }
        if span.is_empty() {
            return Err(Error::InvalidArgument("word span has no frames".into()));
        }
        if let Some(last) = span.last().filter(|&f| f >= fine_t) {
            return Err(Error::DimensionMismatch(format!(
                "word frame {last} beyond the {fine_t} frames of the tensor"
            )));
        }

        let mut cell_counts = vec![0u32; tensor.frame_len()];
        let mut mask_pixels = 0usize;
        for (y, row) in mask.bits().chunks_exact(fine_w).enumerate() {
            let base = (y / scale.y) * tensor.width();
            for (x, _) in row.iter().enumerate().filter(|(_, &b)| b) {
                cell_counts[base + x / scale.x] += 1;
                mask_pixels += 1;
            }
        }
        if mask_pixels == 0 {
            return Err(Error::InvalidArgument(format!("mask of class {:?} is empty", mask.class_id())));
        }
        let cells = cell_counts
            .iter()
            .enumerate()
            .filter(|(_, &c)| c > 0)
            .map(|(i, &c)| (i, f64::from(c)))
            .collect();

        let mut frames: Vec<(usize, f64)> = Vec::new();
        for f in span.iter() {
            let coarse = f / scale.t;
            match frames.last_mut() {
                Some((n, k)) if *n == coarse => *k += 1.0,
                _ => frames.push((coarse, 1.0)),
            }
        }

        Ok(Self {
            cells,
            frames,
            block_pixels: (scale.x * scale.y) as f64,
            block_frames: scale.t as f64,
            mask_pixels: mask_pixels as f64,
            span_frames: span.len() as f64,
            image_pixels: (fine_w * fine_h) as f64,
            utterance_frames: fine_t as f64,
        })
    }

    pub fn mask_pixels(&self) -> usize {
        self.mask_pixels as usize
    }

    pub fn span_frames(&self) -> usize {
        self.span_frames as usize
    }

    fn uniform_object(&self) -> f64 {
        self.mask_pixels / self.image_pixels
    }

    fn uniform_word(&self) -> f64 {
        self.span_frames / self.utterance_frames
    }

    /// Mean over word frames of the per-frame share of attention on the object.
    pub fn alignment_score_object(&self, tensor: &AlignmentTensor) -> f64 {
        let mut acc = 0.0;
        for &(n, k) in &self.frames {
            let frame = tensor.frame(n);
            let total: f64 = frame.iter().map(|&v| f64::from(v)).sum();
            let share = if total > 0.0 {
                let inside: f64 = self.cells.iter().map(|&(c, m)| m * f64::from(frame[c])).sum();
                inside / (self.block_pixels * total)
            } else {
                self.uniform_object()
            };
            acc += k * share;
        }
        (acc / self.span_frames).min(1.0)
    }

    /// Mean over object pixels of the per-pixel share of attention inside the word.
    pub fn alignment_score_word(&self, tensor: &AlignmentTensor) -> f64 {
        let values = tensor.values();
        let stride = tensor.frame_len();
        let mut acc = 0.0;
        for &(c, m) in &self.cells {
            let total: f64 = values[c..].iter().step_by(stride).map(|&v| f64::from(v)).sum();
            let share = if total > 0.0 {
                let inside: f64 = self.frames.iter().map(|&(n, k)| k * f64::from(values[n * stride + c])).sum();
                inside / (self.block_frames * total)
            } else {
                self.uniform_word()
            };
            acc += m * share;
        }
        (acc / self.mask_pixels).min(1.0)
    }

    /// Share of the attention accumulated over the word that falls on the object.
    pub fn glancing_score_object(&self, tensor: &AlignmentTensor) -> f64 {
        let mut accumulated = vec![0.0f64; tensor.frame_len()];
        for &(n, k) in &self.frames {
            for (a, &v) in accumulated.iter_mut().zip(tensor.frame(n)) {
                *a += k * f64::from(v);
            }
        }
        let total: f64 = accumulated.iter().sum();
        if total > 0.0 {
            let inside: f64 = self.cells.iter().map(|&(c, m)| m * accumulated[c]).sum();
            (inside / (self.block_pixels * total)).min(1.0)
        } else {
            self.uniform_object()
        }
    }

    /// Share of the object's attention over the utterance that falls inside the word.
    pub fn glancing_score_word(&self, tensor: &AlignmentTensor) -> f64 {
        let object_attention: Vec<f64> = (0..tensor.frames())
            .map(|n| {
                let frame = tensor.frame(n);
                self.cells.iter().map(|&(c, m)| m * f64::from(frame[c])).sum()
            })
            .collect();
        let total: f64 = object_attention.iter().sum();
        if total > 0.0 {
            let inside: f64 = self.frames.iter().map(|&(n, k)| k * object_attention[n]).sum();
            (inside / (self.block_frames * total)).min(1.0)
        } else {
            self.uniform_word()
        }
    }

    pub fn score(&self, tensor: &AlignmentTensor, metric: Metric) -> f64 {
        match metric {
            Metric::AsObject => self.alignment_score_object(tensor),
            Metric::AsWord => self.alignment_score_word(tensor),
            Metric::GsObject => self.glancing_score_object(tensor),
            Metric::GsWord => self.glancing_score_word(tensor),
        }
    }
}

/// The four scores of one word-object pair.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Scores {
    pub as_object: f64,
    pub as_word: f64,
    pub gs_object: f64,
    pub gs_word: f64,
}

impl Scores {
    pub fn get(&self, metric: Metric) -> f64 {
        match metric {
            Metric::AsObject => self.as_object,
            Metric::AsWord => self.as_word,
            Metric::GsObject => self.gs_object,
            Metric::GsWord => self.gs_word,
        }
    }

    pub fn as_array(&self) -> [f64; 4] {
        [self.as_object, self.as_word, self.gs_object, self.gs_word]
    }
}

pub fn alignment_score_object(tensor: &AlignmentTensor, mask: &ObjectMask, span: &FrameSet) -> Result<f64> {
    Ok(Footprint::new(tensor, mask, span, Upscale::IDENTITY)?.alignment_score_object(tensor))
}

pub fn alignment_score_word(tensor: &AlignmentTensor, mask: &ObjectMask, span: &FrameSet) -> Result<f64> {
    Ok(Footprint::new(tensor, mask, span, Upscale::IDENTITY)?.alignment_score_word(tensor))
}

pub fn glancing_score_object(tensor: &AlignmentTensor, mask: &ObjectMask, span: &FrameSet) -> Result<f64> {
    Ok(Footprint::new(tensor, mask, span, Upscale::IDENTITY)?.glancing_score_object(tensor))
}

pub fn glancing_score_word(tensor: &AlignmentTensor, mask: &ObjectMask, span: &FrameSet) -> Result<f64> {
    Ok(Footprint::new(tensor, mask, span, Upscale::IDENTITY)?.glancing_score_word(tensor))
}

/// All four scores; `scale` relates a coarse tensor to the mask and span
/// resolution ([`Upscale::IDENTITY`] when they match).
pub fn score_all(tensor: &AlignmentTensor, mask: &ObjectMask, span: &FrameSet, scale: Upscale) -> Result<Scores> {
    let fp = Footprint::new(tensor, mask, span, scale)?;
    Ok(Scores {
        as_object: fp.alignment_score_object(tensor),
        as_word: fp.alignment_score_word(tensor),
        gs_object: fp.glancing_score_object(tensor),
        gs_word: fp.glancing_score_word(tensor),
    })
}

/// Per-pair scores plus the covariates used for scatter analysis.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScoreRecord {
    pub sample_id: String,
    #[serde(rename = "class")]
    pub class_id: String,
    pub word: String,
    pub as_object: Option<f64>,
    pub as_word: Option<f64>,
    pub gs_object: Option<f64>,
    pub gs_word: Option<f64>,
    pub object_pixels: usize,
    pub word_frames: usize,
    pub image_pixels: usize,
    pub utterance_frames: usize,
    pub frame_ms: f64,
}

impl ScoreRecord {
    pub fn get(&self, metric: Metric) -> Option<f64> {
        match metric {
            Metric::AsObject => self.as_object,
            Metric::AsWord => self.as_word,
            Metric::GsObject => self.gs_object,
            Metric::GsWord => self.gs_word,
        }
    }

    /// |S_c| / (N_x * N_y).
    pub fn relative_object_size(&self) -> f64 {
        self.object_pixels as f64 / self.image_pixels as f64
    }

    pub fn word_duration_ms(&self) -> f64 {
        self.word_frames as f64 * self.frame_ms
    }
}

/// Scores the selected metrics of one ground-truth pair.
pub fn score_pair(
    tensor: &AlignmentTensor,
    sample: &SampleGroundTruth,
    entry: &GtEntry,
    scale: Upscale,
    metrics: &[Metric],
) -> Result<ScoreRecord> {
    let fp = Footprint::new(tensor, &entry.mask, &entry.frames, scale)?;
    let pick = |m: Metric| metrics.contains(&m).then(|| fp.score(tensor, m));
    Ok(ScoreRecord {
        sample_id: sample.sample_id.clone(),
        class_id: entry.class_id.clone(),
        word: entry.word.clone(),
        as_object: pick(Metric::AsObject),
        as_word: pick(Metric::AsWord),
        gs_object: pick(Metric::GsObject),
        gs_word: pick(Metric::GsWord),
        object_pixels: fp.mask_pixels(),
        word_frames: fp.span_frames(),
        image_pixels: sample.image_width * sample.image_height,
        utterance_frames: sample.frames,
        frame_ms: f64::from(sample.frame_ms),
    })
}

/// A score computed with the mask of one class and the word of another.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConfusionCell {
    pub object_class: String,
    pub word_class: String,
    pub word: String,
    pub metric: Metric,
    pub score: f64,
}

/// Cross-class scores: for each class mask `c1` and each word occurrence of
/// another class `c2`, `metric` evaluated on `S_c1` and `T_c2`.
///
/// Samples with fewer than two classes give an empty list.
pub fn confusion_scores(
    tensor: &AlignmentTensor,
    sample: &SampleGroundTruth,
    metric: Metric,
    scale: Upscale,
) -> Result<Vec<ConfusionCell>> {
    let classes = sample.classes();
    if classes.len() < 2 {
        return Ok(Vec::new());
    }
    let mut cells = Vec::new();
    for object_class in classes {
        let mask = &sample
            .entries
            .iter()
            .find(|e| e.class_id == object_class)
            .expect("class taken from entries")
            .mask;
        for word_entry in sample.entries.iter().filter(|e| e.class_id != object_class) {
            let fp = Footprint::new(tensor, mask, &word_entry.frames, scale)?;
            cells.push(ConfusionCell {
                object_class: object_class.to_owned(),
                word_class: word_entry.class_id.clone(),
                word: word_entry.word.clone(),
                metric,
                score: fp.score(tensor, metric),
            });
        }
    }
    Ok(cells)
}

/// `metric` for an arbitrary mask and span; the diagonal of
/// [`confusion_scores`].
pub fn cross_score(
    tensor: &AlignmentTensor,
    mask: &ObjectMask,
    span: &FrameSet,
    metric: Metric,
    scale: Upscale,
) -> Result<f64> {
    Ok(Footprint::new(tensor, mask, span, scale)?.score(tensor, metric))
}

/// Tensor of independent uniform `[0, 1)` values; same seed, same tensor.
pub fn random_baseline_tensor(
    width: usize,
    height: usize,
    frames: usize,
    frame_ms: f32,
    seed: u64,
) -> Result<AlignmentTensor> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let values = (0..width * height * frames).map(|_| rng.random::<f32>()).collect();
    AlignmentTensor::new(width, height, frames, frame_ms, values)
}

/// Per-sample seed for baseline tensors, independent of evaluation order.
pub fn sample_seed(master_seed: u64, sample_id: &str) -> u64 {
    // FNV-1a over the id, then a splitmix64 finalizer over the combination.
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    for b in sample_id.bytes() {
        h ^= u64::from(b);
        h = h.wrapping_mul(0x0000_0100_0000_01b3);
    }
    let mut z = master_seed ^ h.rotate_left(32);
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}
