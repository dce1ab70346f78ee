#![allow(dead_code)]

use avalign::{AlignmentTensor, FrameSet, ObjectMask};
use rand::{Rng, RngCore};

/// A random scoring instance: tensor, nonempty mask and nonempty span.
pub struct Instance {
    pub tensor: AlignmentTensor,
    pub mask: ObjectMask,
    pub span: FrameSet,
}

/// Kind of values drawn for a random tensor.
#[derive(Clone, Copy, Debug)]
pub enum Fill {
    Uniform,
    /// Mostly zeros, so whole frames and pixel series vanish regularly.
    Sparse,
    Zero,
}

pub fn random_tensor(rng: &mut impl RngCore, w: usize, h: usize, t: usize, fill: Fill) -> AlignmentTensor {
    AlignmentTensor::from_fn(w, h, t, 10.0, |_, _, _| match fill {
        Fill::Uniform => rng.random::<f32>(),
        Fill::Sparse => {
            if rng.random_bool(0.15) {
                rng.random::<f32>() * 5.0
            } else {
                0.0
            }
        }
        Fill::Zero => 0.0,
    })
    .unwrap()
}

pub fn random_mask(rng: &mut impl RngCore, w: usize, h: usize) -> ObjectMask {
    let density = rng.random_range(0.05..0.9);
    let mut mask = ObjectMask::from_fn(w, h, "c", |_, _| rng.random_bool(density));
    if mask.is_empty() {
        let (x, y) = (rng.random_range(0..w), rng.random_range(0..h));
        mask = ObjectMask::from_fn(w, h, "c", |a, b| (a, b) == (x, y));
    }
    mask
}

/// Either a contiguous range or an arbitrary subset of frames.
pub fn random_span(rng: &mut impl RngCore, t: usize) -> FrameSet {
    if rng.random_bool(0.5) {
        let start = rng.random_range(0..t);
        let end = rng.random_range(start + 1..=t);
        FrameSet::range(start..end)
    } else {
        let mut frames: Vec<usize> = (0..t).filter(|_| rng.random_bool(0.4)).collect();
        if frames.is_empty() {
            frames.push(rng.random_range(0..t));
        }
        FrameSet::new(frames)
    }
}

pub fn random_instance(rng: &mut impl RngCore, max_w: usize, max_h: usize, max_t: usize, fill: Fill) -> Instance {
    let w = rng.random_range(1..=max_w);
    let h = rng.random_range(1..=max_h);
    let t = rng.random_range(1..=max_t);
    Instance {
        tensor: random_tensor(rng, w, h, t, fill),
        mask: random_mask(rng, w, h),
        span: random_span(rng, t),
    }
}
