//! Synthetic tensors and ground truth with analytically known scores.

pub mod oracle;

use rand::seq::index::sample as sample_indices;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::ground_truth::{FrameSet, ObjectMask, PairRecord, SampleRecord};
use crate::metrics::sample_seed;
use crate::tensor::AlignmentTensor;

pub use oracle::oracle_scores;

/// Largest integer every `f32` below it represents exactly.
const F32_EXACT: f64 = 16_777_216.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Background {
    /// Off-object mass spread evenly over the complement of the mask.
    Uniform,
    /// Off-object mass spread with random integer weights.
    Random(u64),
}

/// A mask, its word frames and the fraction of attention planted on the mask
/// in each of those frames.
#[derive(Debug, Clone)]
pub struct Plant {
    pub mask: ObjectMask,
    pub span: FrameSet,
    pub p: f64,
}

#[derive(Debug, Clone)]
pub struct PlantedScene {
    pub tensor: AlignmentTensor,
    pub mask: ObjectMask,
    pub span: FrameSet,
    pub p: f64,
    /// AS_object of the tensor, by construction.
    pub expected_as_object: f64,
    /// GS_object, known when the background is uniform.
    pub expected_gs_object: Option<f64>,
    /// GS_object and GS_word of an all-zero tensor for this mask and span.
    pub uniform_gs_object: f64,
    pub uniform_gs_word: f64,
}

/// Small-denominator fraction equal to `p`, if any.
fn as_fraction(p: f64) -> Option<(u64, u64)> {
    (1..=1000u64).find_map(|den| {
        let num = (p * den as f64).round();
        ((num / den as f64 - p).abs() < 1e-12).then_some((num as u64, den))
    })
}

/// Writes one frame carrying fraction `p` of its mass on `mask`.
fn plant_frame(frame: &mut [f32], mask: &ObjectMask, p: f64, background: &mut Option<ChaCha8Rng>) {
    let inside = mask.count();
    let outside = frame.len() - inside;
    if outside == 0 {
        frame.fill(1.0);
        return;
    }
    let weights: Vec<u64> = match background {
        Some(rng) => (0..outside).map(|_| rng.random_range(1..=16)).collect(),
        None => vec![1; outside],
    };
    let weight_sum: u64 = weights.iter().sum();

    // Integer masses keep the inside share exact after the f64 reductions.
    let exact = as_fraction(p).and_then(|(num, den)| {
        let a = (num * weight_sum) as f64;
        let b_max = ((den - num) * inside as u64 * 16) as f64;
        (a <= F32_EXACT && b_max <= F32_EXACT).then_some((num, den))
    });
    let (inside_value, outside_unit) = match exact {
        Some((num, den)) => ((num * weight_sum) as f64, ((den - num) * inside as u64) as f64),
        None => (p / inside as f64, (1.0 - p) / weight_sum as f64),
    };
    let mut w = weights.iter();
    for (v, &b) in frame.iter_mut().zip(mask.bits()) {
        *v = if b {
            inside_value as f32
        } else {
            (outside_unit * *w.next().unwrap() as f64) as f32
        };
    }
}

/// Tensor where each plant's span frames carry fraction `p` of their mass on
/// the plant's mask; all other frames are uniform.
pub fn plant_scene(
    width: usize,
    height: usize,
    frames: usize,
    frame_ms: f32,
    plants: &[Plant],
    background: Background,
) -> Result<AlignmentTensor> {
    let mut owner = vec![None; frames];
    for (i, plant) in plants.iter().enumerate() {
        if !(0.0..=1.0).contains(&plant.p) {
            return Err(Error::InvalidArgument(format!("planted fraction {} outside [0, 1]", plant.p)));
        }
        if (plant.mask.width(), plant.mask.height()) != (width, height) {
            return Err(Error::DimensionMismatch(format!(
                "mask is {}x{}, scene is {width}x{height}",
                plant.mask.width(),
                plant.mask.height()
            )));
        }
        let count = plant.mask.count();
        if count == 0 {
            return Err(Error::InvalidArgument("cannot plant on an empty mask".into()));
        }
        if count == width * height && plant.p < 1.0 {
            return Err(Error::InvalidArgument(
                "mask covers the whole image; no room for off-object mass".into(),
            ));
        }
        if plant.span.is_empty() {
            return Err(Error::InvalidArgument("cannot plant on an empty span".into()));
        }
        for f in plant.span.iter() {
            let slot = owner
                .get_mut(f)
                .ok_or_else(|| Error::DimensionMismatch(format!("span frame {f} beyond {frames} frames")))?;
            if slot.replace(i).is_some() {
                return Err(Error::InvalidArgument(format!("frame {f} planted twice")));
            }
        }
    }

    let mut rng = match background {
        Background::Uniform => None,
        Background::Random(seed) => Some(ChaCha8Rng::seed_from_u64(seed)),
    };
    let n = width * height;
    let mut values = vec![1.0f32; n * frames];
    for (t, frame) in values.chunks_exact_mut(n).enumerate() {
        if let Some(i) = owner[t] {
            plant_frame(frame, &plants[i].mask, plants[i].p, &mut rng);
        }
    }
    AlignmentTensor::new(width, height, frames, frame_ms, values)
}

pub fn plant_alignment(
    (width, height, frames): (usize, usize, usize),
    mask: &ObjectMask,
    span: &FrameSet,
    p: f64,
    background: Background,
) -> Result<PlantedScene> {
    let plant = Plant {
        mask: mask.clone(),
        span: span.clone(),
        p,
    };
    let tensor = plant_scene(width, height, frames, 10.0, std::slice::from_ref(&plant), background)?;
    let relative_size = mask.count() as f64 / (width * height) as f64;
    Ok(PlantedScene {
        tensor,
        mask: plant.mask,
        span: plant.span,
        p,
        expected_as_object: p,
        expected_gs_object: (background == Background::Uniform).then_some(p),
        uniform_gs_object: relative_size,
        uniform_gs_word: span.len() as f64 / frames as f64,
    })
}

/// Grid sizes of a synthetic dataset.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Dims {
    pub width: usize,
    pub height: usize,
    pub frames: usize,
}

impl std::str::FromStr for Dims {
    type Err = Error;

    /// Parses `WxHxN`.
    fn from_str(s: &str) -> Result<Self> {
        let parts: Vec<usize> = s
            .split('x')
            .map(|p| p.trim().parse::<usize>())
            .collect::<std::result::Result<_, _>>()
            .map_err(|_| Error::InvalidArgument(format!("dimensions {s:?} are not WxHxN")))?;
        match parts[..] {
            [width, height, frames] if width > 0 && height > 0 && frames > 0 => Ok(Dims { width, height, frames }),
            _ => Err(Error::InvalidArgument(format!("dimensions {s:?} are not WxHxN"))),
        }
    }
}

#[derive(Debug, Clone)]
pub struct SynthConfig {
    /// Tensor resolution.
    pub coarse: Dims,
    /// Ground-truth resolution; each axis a multiple of `coarse`.
    pub eval: Dims,
    pub eval_frame_ms: f64,
    pub samples: usize,
    pub seed: u64,
}

/// One synthetic sample with the fraction planted for each of its pairs.
#[derive(Debug, Clone)]
pub struct SynthSample {
    pub record: SampleRecord,
    pub tensor: AlignmentTensor,
    pub planted: Vec<f64>,
}

pub const PLANTED_FRACTIONS: [f64; 6] = [0.0, 0.25, 0.35, 0.5, 0.75, 1.0];
const SYNTH_CLASSES: usize = 10;

/// Samples with up to three classes each. Masks are rectangles of whole
/// tensor cells and spans whole tensor frames, so AS_object at evaluation
/// resolution equals the planted fraction.
pub fn synth_dataset(cfg: &SynthConfig) -> Result<Vec<SynthSample>> {
    let Dims { width, height, frames } = cfg.coarse;
    let scale = |fine: usize, coarse: usize| {
        (fine.is_multiple_of(coarse) && fine >= coarse)
            .then_some(fine / coarse)
            .ok_or_else(|| Error::InvalidArgument(format!("evaluation size {fine} not a multiple of {coarse}")))
    };
    let (sx, sy, st) = (
        scale(cfg.eval.width, width)?,
        scale(cfg.eval.height, height)?,
        scale(cfg.eval.frames, frames)?,
    );
    if width * height < 2 {
        return Err(Error::InvalidArgument("tensor needs at least two cells".into()));
    }
    let coarse_frame_ms = (cfg.eval_frame_ms * st as f64) as f32;

    (0..cfg.samples)
        .map(|i| {
            let sample_id = format!("s{i:06}");
            let mut rng = ChaCha8Rng::seed_from_u64(sample_seed(cfg.seed, &sample_id));
            let n_classes = rng.random_range(1..=3usize).min(frames);
            let mut classes = sample_indices(&mut rng, SYNTH_CLASSES, n_classes).into_vec();
            classes.sort_unstable();

            let mut plants = Vec::new();
            let mut pairs = Vec::new();
            let mut planted = Vec::new();
            let segment = frames / n_classes;
            for (j, class) in classes.iter().enumerate() {
                let class_id = format!("class{class:02}");
                let seg_start = j * segment;
                let seg_end = if j + 1 == n_classes { frames } else { seg_start + segment };
                let start = rng.random_range(seg_start..seg_end);
                let end = rng.random_range(start + 1..=seg_end);

                let (cw, ch) = loop {
                    let cw = rng.random_range(1..=width);
                    let ch = rng.random_range(1..=height);
                    if cw * ch < width * height {
                        break (cw, ch);
                    }
                };
                let x0 = rng.random_range(0..=width - cw);
                let y0 = rng.random_range(0..=height - ch);
                let coarse_mask = ObjectMask::rect(width, height, &class_id, (x0, y0), (x0 + cw, y0 + ch));
                let fine_mask = ObjectMask::rect(
                    cfg.eval.width,
                    cfg.eval.height,
                    &class_id,
                    (x0 * sx, y0 * sy),
                    ((x0 + cw) * sx, (y0 + ch) * sy),
                );
                let p = PLANTED_FRACTIONS[rng.random_range(0..PLANTED_FRACTIONS.len())];
                plants.push(Plant {
                    mask: coarse_mask,
                    span: FrameSet::range(start..end),
                    p,
                });
                pairs.push(PairRecord {
                    class: class_id.clone(),
                    word: format!("word{class:02}"),
                    onset_ms: (start * st) as f64 * cfg.eval_frame_ms,
                    offset_ms: (end * st) as f64 * cfg.eval_frame_ms,
                    mask_rle: fine_mask.encode_rle(),
                    label: None,
                    similarity: None,
                });
                planted.push(p);
            }
            let background = Background::Random(rng.random());
            let tensor = plant_scene(width, height, frames, coarse_frame_ms, &plants, background)?;
            Ok(SynthSample {
                record: SampleRecord {
                    sample_id,
                    image_w: cfg.eval.width,
                    image_h: cfg.eval.height,
                    frames: cfg.eval.frames,
                    frame_ms: cfg.eval_frame_ms,
                    pairs,
                },
                tensor,
                planted,
            })
        })
        .collect()
}
