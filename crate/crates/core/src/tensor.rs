//! Alignment tensors over image space and speech time.
//!
//! Values are stored frame-major with row-major frames, so the element at
//! `(x, y, t)` lives at `t * width * height + y * width + x`. Storage is `f32`;
//! every reduction is carried out in `f64`.

use crate::error::{Error, Result};

/// Frame duration at the evaluation resolution.
pub const EVAL_FRAME_MS: f32 = 10.0;

/// Nonnegative association strengths between image cells and speech frames.
#[derive(Debug, Clone, PartialEq)]
pub struct AlignmentTensor {
    width: usize,
    height: usize,
    frames: usize,
    frame_ms: f32,
    values: Vec<f32>,
}

fn check_dims(width: usize, height: usize, frames: usize, frame_ms: f32) -> Result<()> {
    if width == 0 || height == 0 || frames == 0 {
        return Err(Error::InvalidTensor(format!(
            "dimensions must be at least 1, got {width}x{height}x{frames}"
        )));
    }
    if !(frame_ms.is_finite() && frame_ms > 0.0) {
        return Err(Error::InvalidTensor(format!(
            "frame duration must be positive, got {frame_ms}"
        )));
    }
    Ok(())
}

impl AlignmentTensor {
    pub fn new(
        width: usize,
        height: usize,
        frames: usize,
        frame_ms: f32,
        values: Vec<f32>,
    ) -> Result<Self> {
        check_dims(width, height, frames, frame_ms)?;
        let expected = width * height * frames;
        if values.len() != expected {
            return Err(Error::InvalidTensor(format!(
                "expected {expected} values for {width}x{height}x{frames}, got {}",
                values.len()
            )));
        }
        if let Some((i, v)) = values
            .iter()
            .enumerate()
            .find(|(_, v)| !(v.is_finite() && **v >= 0.0))
        {
            return Err(Error::InvalidTensor(format!(
                "value {v} at offset {i} is not a finite nonnegative number"
            )));
        }
        Ok(Self {
            width,
            height,
            frames,
            frame_ms,
            values,
        })
    }

    pub fn zeros(width: usize, height: usize, frames: usize, frame_ms: f32) -> Result<Self> {
        check_dims(width, height, frames, frame_ms)?;
        Ok(Self {
            width,
            height,
            frames,
            frame_ms,
            values: vec![0.0; width * height * frames],
        })
    }

    /// Builds a tensor by evaluating `f(x, y, t)` at every element.
    pub fn from_fn(
        width: usize,
        height: usize,
        frames: usize,
        frame_ms: f32,
        mut f: impl FnMut(usize, usize, usize) -> f32,
    ) -> Result<Self> {
        check_dims(width, height, frames, frame_ms)?;
        let mut values = Vec::with_capacity(width * height * frames);
        for t in 0..frames {
            for y in 0..height {
                for x in 0..width {
                    values.push(f(x, y, t));
                }
            }
        }
        Self::new(width, height, frames, frame_ms, values)
    }

    /// Assembles a tensor from values already known to satisfy the invariants.
    pub(crate) fn from_parts_unchecked(
        width: usize,
        height: usize,
        frames: usize,
        frame_ms: f32,
        values: Vec<f32>,
    ) -> Self {
        debug_assert_eq!(values.len(), width * height * frames);
        Self {
            width,
            height,
            frames,
            frame_ms,
            values,
        }
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn frames(&self) -> usize {
        self.frames
    }

    pub fn frame_ms(&self) -> f32 {
        self.frame_ms
    }

    /// Number of cells in one frame.
    pub fn frame_len(&self) -> usize {
        self.width * self.height
    }

    pub fn values(&self) -> &[f32] {
        &self.values
    }

    pub fn into_values(self) -> Vec<f32> {
        self.values
    }

    #[inline]
    pub fn index(&self, x: usize, y: usize, t: usize) -> usize {
        t * self.frame_len() + y * self.width + x
    }

    #[inline]
    pub fn get(&self, x: usize, y: usize, t: usize) -> f32 {
        self.values[self.index(x, y, t)]
    }

    /// The cells of frame `t`, row-major.
    pub fn frame(&self, t: usize) -> &[f32] {
        let n = self.frame_len();
        &self.values[t * n..(t + 1) * n]
    }

    /// Per-frame normalization: every frame sums to one. All-zero frames
    /// become uniform.
    pub fn normalize_per_frame(&self) -> AlignmentTensor {
        let n = self.frame_len();
        let mut out = Vec::with_capacity(self.values.len());
        for frame in self.values.chunks_exact(n) {
            let total: f64 = frame.iter().map(|&v| f64::from(v)).sum();
            if total > 0.0 {
                out.extend(frame.iter().map(|&v| (f64::from(v) / total) as f32));
            } else {
                out.extend(std::iter::repeat_n((1.0 / n as f64) as f32, n));
            }
        }
        self.with_values(out)
    }

    /// Per-pixel normalization: every pixel's time series sums to one.
    /// All-zero series become uniform over the utterance.
    pub fn normalize_per_pixel(&self) -> AlignmentTensor {
        let n = self.frame_len();
        let totals = self.pixel_totals();
        let uniform = (1.0 / self.frames as f64) as f32;
        let mut out = vec![0.0f32; self.values.len()];
        for (t, frame) in self.values.chunks_exact(n).enumerate() {
            let dst = &mut out[t * n..(t + 1) * n];
            for ((d, &v), &total) in dst.iter_mut().zip(frame).zip(&totals) {
                *d = if total > 0.0 {
                    (f64::from(v) / total) as f32
                } else {
                    uniform
                };
            }
        }
        self.with_values(out)
    }

    /// Softmax over space, independently for every frame.
    pub fn softmax_space(&self, temperature: f32) -> Result<AlignmentTensor> {
        let values = softmax_space_values(&self.values, self.frame_len(), temperature)?;
        Ok(self.with_values(values))
    }

    /// Softmax over time, independently for every pixel.
    pub fn softmax_time(&self, temperature: f32) -> Result<AlignmentTensor> {
        let values = softmax_time_values(&self.values, self.frame_len(), temperature)?;
        Ok(self.with_values(values))
    }

    /// Enlarges the tensor to the target resolution.
    pub fn upsample(
        &self,
        target_width: usize,
        target_height: usize,
        target_frames: usize,
        mode: UpsampleMode,
    ) -> Result<AlignmentTensor> {
        if target_width < self.width || target_height < self.height || target_frames < self.frames
        {
            return Err(Error::InvalidArgument(format!(
                "cannot upsample {}x{}x{} to smaller {target_width}x{target_height}x{target_frames}",
                self.width, self.height, self.frames
            )));
        }
        let values = match mode {
            UpsampleMode::Nearest => self.upsample_nearest(target_width, target_height, target_frames),
            UpsampleMode::Linear => self.upsample_linear(target_width, target_height, target_frames),
        };
        let frame_ms = (f64::from(self.frame_ms) * self.frames as f64 / target_frames as f64) as f32;
        Ok(AlignmentTensor::from_parts_unchecked(
            target_width,
            target_height,
            target_frames,
            frame_ms,
            values,
        ))
    }

    fn upsample_nearest(&self, tw: usize, th: usize, tf: usize) -> Vec<f32> {
        let xs: Vec<usize> = (0..tw).map(|i| i * self.width / tw).collect();
        let ys: Vec<usize> = (0..th).map(|i| i * self.height / th).collect();
        let mut out = Vec::with_capacity(tw * th * tf);
        for t in 0..tf {
            let frame = self.frame(t * self.frames / tf);
            for &sy in &ys {
                let row = &frame[sy * self.width..(sy + 1) * self.width];
                out.extend(xs.iter().map(|&sx| row[sx]));
            }
        }
        out
    }

    fn upsample_linear(&self, tw: usize, th: usize, tf: usize) -> Vec<f32> {
        let xs = linear_taps(self.width, tw);
        let ys = linear_taps(self.height, th);
        let ts = linear_taps(self.frames, tf);
        let mut out = Vec::with_capacity(tw * th * tf);
        for &(t0, t1, wt) in &ts {
            for &(y0, y1, wy) in &ys {
                for &(x0, x1, wx) in &xs {
                    let lerp_xy = |t: usize| {
                        let at = |x: usize, y: usize| f64::from(self.get(x, y, t));
                        let top = at(x0, y0) * (1.0 - wx) + at(x1, y0) * wx;
                        let bottom = at(x0, y1) * (1.0 - wx) + at(x1, y1) * wx;
                        top * (1.0 - wy) + bottom * wy
                    };
                    let v = lerp_xy(t0) * (1.0 - wt) + lerp_xy(t1) * wt;
                    out.push(v.max(0.0) as f32);
                }
            }
        }
        out
    }

    /// Sum over time of every pixel, row-major.
    pub(crate) fn pixel_totals(&self) -> Vec<f64> {
        let n = self.frame_len();
        let mut totals = vec![0.0f64; n];
        for frame in self.values.chunks_exact(n) {
            for (acc, &v) in totals.iter_mut().zip(frame) {
                *acc += f64::from(v);
            }
        }
        totals
    }

    fn with_values(&self, values: Vec<f32>) -> AlignmentTensor {
        AlignmentTensor::from_parts_unchecked(
            self.width,
            self.height,
            self.frames,
            self.frame_ms,
            values,
        )
    }
}

/// Interpolation used by [`AlignmentTensor::upsample`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum UpsampleMode {
    /// Block replication; source index `floor(i * src / dst)`.
    #[default]
    Nearest,
    /// Trilinear interpolation on half-cell centers, clamped at the edges.
    Linear,
}

/// For every destination index: the two source indices and the weight of the
/// second one.
fn linear_taps(src: usize, dst: usize) -> Vec<(usize, usize, f64)> {
    let scale = src as f64 / dst as f64;
    (0..dst)
        .map(|i| {
            let pos = ((i as f64 + 0.5) * scale - 0.5).clamp(0.0, (src - 1) as f64);
            let lo = pos.floor() as usize;
            let hi = (lo + 1).min(src - 1);
            (lo, hi, pos - lo as f64)
        })
        .collect()
}

fn check_temperature(temperature: f32) -> Result<()> {
    if temperature.is_finite() && temperature > 0.0 {
        Ok(())
    } else {
        Err(Error::InvalidArgument(format!(
            "softmax temperature must be positive, got {temperature}"
        )))
    }
}

fn softmax_space_values(values: &[f32], frame_len: usize, temperature: f32) -> Result<Vec<f32>> {
    check_temperature(temperature)?;
    let temp = f64::from(temperature);
    let mut out = Vec::with_capacity(values.len());
    let mut scratch = vec![0.0f64; frame_len];
    for frame in values.chunks_exact(frame_len) {
        let max = frame.iter().fold(f64::NEG_INFINITY, |m, &v| m.max(f64::from(v)));
        let mut total = 0.0;
        for (s, &v) in scratch.iter_mut().zip(frame) {
            *s = ((f64::from(v) - max) / temp).exp();
            total += *s;
        }
        out.extend(scratch.iter().map(|&e| (e / total) as f32));
    }
    Ok(out)
}

fn softmax_time_values(values: &[f32], frame_len: usize, temperature: f32) -> Result<Vec<f32>> {
    check_temperature(temperature)?;
    let temp = f64::from(temperature);
    let mut max = vec![f64::NEG_INFINITY; frame_len];
    for frame in values.chunks_exact(frame_len) {
        for (m, &v) in max.iter_mut().zip(frame) {
            *m = m.max(f64::from(v));
        }
    }
    let mut exps: Vec<f64> = Vec::with_capacity(values.len());
    let mut totals = vec![0.0f64; frame_len];
    for frame in values.chunks_exact(frame_len) {
        for ((&v, &m), total) in frame.iter().zip(&max).zip(totals.iter_mut()) {
            let e = ((f64::from(v) - m) / temp).exp();
            *total += e;
            exps.push(e);
        }
    }
    Ok(exps
        .chunks_exact(frame_len)
        .flat_map(|frame| frame.iter().zip(&totals).map(|(&e, &total)| (e / total) as f32))
        .collect())
}

/// Raw image-speech dot products, which may be negative.
///
/// Produced by [`product_logits`]; turned into an [`AlignmentTensor`] either by
/// clamping or by a softmax.
#[derive(Debug, Clone, PartialEq)]
pub struct ProductLogits {
    width: usize,
    height: usize,
    frames: usize,
    frame_ms: f32,
    values: Vec<f32>,
}

impl ProductLogits {
    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn frames(&self) -> usize {
        self.frames
    }

    pub fn values(&self) -> &[f32] {
        &self.values
    }

    pub fn clamp_negative(self) -> AlignmentTensor {
        let values = self.values.into_iter().map(|v| v.max(0.0)).collect();
        AlignmentTensor::from_parts_unchecked(self.width, self.height, self.frames, self.frame_ms, values)
    }

    pub fn softmax_space(&self, temperature: f32) -> Result<AlignmentTensor> {
        let values = softmax_space_values(&self.values, self.width * self.height, temperature)?;
        Ok(AlignmentTensor::from_parts_unchecked(
            self.width,
            self.height,
            self.frames,
            self.frame_ms,
            values,
        ))
    }

    pub fn softmax_time(&self, temperature: f32) -> Result<AlignmentTensor> {
        let values = softmax_time_values(&self.values, self.width * self.height, temperature)?;
        Ok(AlignmentTensor::from_parts_unchecked(
            self.width,
            self.height,
            self.frames,
            self.frame_ms,
            values,
        ))
    }
}

/// Spatial embeddings of an image, one vector per grid cell (row-major cells).
#[derive(Debug, Clone, PartialEq)]
pub struct EmbeddingGrid {
    width: usize,
    height: usize,
    dim: usize,
    values: Vec<f32>,
}

impl EmbeddingGrid {
    pub fn new(width: usize, height: usize, dim: usize, values: Vec<f32>) -> Result<Self> {
        if width == 0 || height == 0 || dim == 0 {
            return Err(Error::InvalidArgument(format!(
                "embedding grid dimensions must be at least 1, got {width}x{height}x{dim}"
            )));
        }
        if values.len() != width * height * dim {
            return Err(Error::InvalidArgument(format!(
                "expected {} grid values, got {}",
                width * height * dim,
                values.len()
            )));
        }
        Ok(Self {
            width,
            height,
            dim,
            values,
        })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn cell(&self, x: usize, y: usize) -> &[f32] {
        let start = (y * self.width + x) * self.dim;
        &self.values[start..start + self.dim]
    }

    /// Scales every cell vector to unit Euclidean norm (zero vectors stay zero).
    pub fn unit_normalized(mut self) -> Self {
        unit_normalize(&mut self.values, self.dim);
        self
    }
}

/// Per-frame speech embeddings.
#[derive(Debug, Clone, PartialEq)]
pub struct EmbeddingSequence {
    frames: usize,
    dim: usize,
    frame_ms: f32,
    values: Vec<f32>,
}

impl EmbeddingSequence {
    pub fn new(frames: usize, dim: usize, frame_ms: f32, values: Vec<f32>) -> Result<Self> {
        if frames == 0 || dim == 0 {
            return Err(Error::InvalidArgument(format!(
                "embedding sequence dimensions must be at least 1, got {frames}x{dim}"
            )));
        }
        if !(frame_ms.is_finite() && frame_ms > 0.0) {
            return Err(Error::InvalidArgument(format!(
                "frame duration must be positive, got {frame_ms}"
            )));
        }
        if values.len() != frames * dim {
            return Err(Error::InvalidArgument(format!(
                "expected {} sequence values, got {}",
                frames * dim,
                values.len()
            )));
        }
        Ok(Self {
            frames,
            dim,
            frame_ms,
            values,
        })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn frame(&self, t: usize) -> &[f32] {
        &self.values[t * self.dim..(t + 1) * self.dim]
    }

    pub fn unit_normalized(mut self) -> Self {
        unit_normalize(&mut self.values, self.dim);
        self
    }
}

fn unit_normalize(values: &mut [f32], dim: usize) {
    for v in values.chunks_exact_mut(dim) {
        let norm = v.iter().map(|&a| f64::from(a) * f64::from(a)).sum::<f64>().sqrt();
        if norm > 0.0 {
            v.iter_mut().for_each(|a| *a = (f64::from(*a) / norm) as f32);
        }
    }
}

/// Dot product of every grid cell with every speech frame.
pub fn product_logits(img: &EmbeddingGrid, aud: &EmbeddingSequence) -> Result<ProductLogits> {
    if img.dim != aud.dim {
        return Err(Error::DimensionMismatch(format!(
            "image embedding dim {} differs from speech embedding dim {}",
            img.dim, aud.dim
        )));
    }
    let mut values = Vec::with_capacity(img.width * img.height * aud.frames);
    for frame in aud.values.chunks_exact(aud.dim) {
        for cell in img.values.chunks_exact(img.dim) {
            let dot: f64 = cell
                .iter()
                .zip(frame)
                .map(|(&a, &b)| f64::from(a) * f64::from(b))
                .sum();
            values.push(dot as f32);
        }
    }
    Ok(ProductLogits {
        width: img.width,
        height: img.height,
        frames: aud.frames,
        frame_ms: aud.frame_ms,
        values,
    })
}

/// Matrix-product alignment tensor.
///
/// With `clamp_negative` negative products become zero; without it a negative
/// product is an error, since the result must be nonnegative. Use
/// [`product_logits`] to keep negative products for a softmax.
pub fn build_alignment_tensor(
    img: &EmbeddingGrid,
    aud: &EmbeddingSequence,
    clamp_negative: bool,
) -> Result<AlignmentTensor> {
    let logits = product_logits(img, aud)?;
    if !clamp_negative {
        if let Some(v) = logits.values.iter().find(|v| **v < 0.0) {
            return Err(Error::InvalidTensor(format!(
                "negative product {v}; enable clamping or apply a softmax"
            )));
        }
    }
    Ok(logits.clamp_negative())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn frame_tensor(frames: &[[f32; 4]]) -> AlignmentTensor {
        let values = frames.iter().flatten().copied().collect();
        AlignmentTensor::new(2, 2, frames.len(), 10.0, values).unwrap()
    }

    fn series(values: &[f32]) -> AlignmentTensor {
        AlignmentTensor::new(1, 1, values.len(), 10.0, values.to_vec()).unwrap()
    }

    fn assert_close(a: &[f32], b: &[f64], tol: f64) {
        assert_eq!(a.len(), b.len());
        for (i, (&x, &y)) in a.iter().zip(b).enumerate() {
            assert!((f64::from(x) - y).abs() < tol, "index {i}: {x} vs {y}");
        }
    }

    #[test]
    fn rejects_invalid_tensors() {
        assert!(AlignmentTensor::new(0, 1, 1, 10.0, vec![]).is_err());
        assert!(AlignmentTensor::new(1, 1, 1, 0.0, vec![1.0]).is_err());
        assert!(AlignmentTensor::new(1, 1, 1, 10.0, vec![-1.0]).is_err());
        assert!(AlignmentTensor::new(1, 1, 1, 10.0, vec![f32::NAN]).is_err());
        assert!(AlignmentTensor::new(1, 1, 2, 10.0, vec![1.0]).is_err());
    }

    #[test]
    fn layout_is_frame_major() {
        let t = AlignmentTensor::from_fn(3, 2, 2, 10.0, |x, y, t| (100 * t + 10 * y + x) as f32).unwrap();
        assert_eq!(t.values()[t.index(2, 1, 1)], 112.0);
        assert_eq!(t.values()[6 + 3 + 2], 112.0);
        assert_eq!(t.frame(1)[0], 100.0);
    }

    #[test]
    fn build_identity_and_orthogonal() {
        let img = EmbeddingGrid::new(1, 2, 2, vec![1.0, 0.0, 0.0, 1.0]).unwrap();
        let aud = EmbeddingSequence::new(1, 2, 10.0, vec![1.0, 0.0]).unwrap();
        let t = build_alignment_tensor(&img, &aud, true).unwrap();
        assert_eq!(t.get(0, 0, 0), 1.0);
        assert_eq!(t.get(0, 1, 0), 0.0);
    }

    #[test]
    fn build_rejects_dim_mismatch() {
        let img = EmbeddingGrid::new(1, 1, 2, vec![1.0, 0.0]).unwrap();
        let aud = EmbeddingSequence::new(1, 3, 10.0, vec![1.0, 0.0, 0.0]).unwrap();
        assert!(matches!(
            build_alignment_tensor(&img, &aud, true),
            Err(Error::DimensionMismatch(_))
        ));
    }

    #[test]
    fn negative_products_clamp_or_fail() {
        let img = EmbeddingGrid::new(1, 1, 1, vec![1.0]).unwrap();
        let aud = EmbeddingSequence::new(2, 1, 10.0, vec![-2.0, 3.0]).unwrap();
        let t = build_alignment_tensor(&img, &aud, true).unwrap();
        assert_eq!(t.values(), &[0.0, 3.0]);
        assert!(build_alignment_tensor(&img, &aud, false).is_err());
        let soft = product_logits(&img, &aud).unwrap().softmax_time(1.0).unwrap();
        let sum: f32 = soft.values().iter().sum();
        assert!((sum - 1.0).abs() < 1e-6);
    }

    #[test]
    fn per_frame_examples() {
        let t = frame_tensor(&[[2.0; 4], [0.0; 4], [0.2, 0.3, 0.1, 0.4]]);
        let n = t.normalize_per_frame();
        assert_close(
            n.values(),
            &[0.25, 0.25, 0.25, 0.25, 0.25, 0.25, 0.25, 0.25, 0.2, 0.3, 0.1, 0.4],
            1e-7,
        );
    }

    #[test]
    fn per_pixel_examples() {
        assert_close(series(&[1.0, 1.0, 2.0, 0.0]).normalize_per_pixel().values(), &[0.25, 0.25, 0.5, 0.0], 1e-7);
        assert_close(series(&[0.0, 0.0]).normalize_per_pixel().values(), &[0.5, 0.5], 1e-7);
        assert_close(series(&[3.0]).normalize_per_pixel().values(), &[1.0], 1e-12);
    }

    #[test]
    fn softmax_examples() {
        let t = frame_tensor(&[[std::f32::consts::LN_2, 0.0, 0.0, 0.0], [7.0; 4]]);
        let s = t.softmax_space(1.0).unwrap();
        assert_close(s.values(), &[0.4, 0.2, 0.2, 0.2, 0.25, 0.25, 0.25, 0.25], 1e-6);

        let s = series(&[3f32.ln(), 0.0]).softmax_time(1.0).unwrap();
        assert_close(s.values(), &[0.75, 0.25], 1e-6);
        let s = series(&[4.0, 4.0, 4.0]).softmax_time(1.0).unwrap();
        assert_close(s.values(), &[1.0 / 3.0; 3], 1e-7);
        assert!(series(&[1.0]).softmax_time(0.0).is_err());
    }

    #[test]
    fn softmax_temperature_flattens() {
        let t = series(&[2.0, 0.0]);
        let sharp = t.softmax_time(0.5).unwrap();
        let flat = t.softmax_time(4.0).unwrap();
        assert!(sharp.values()[0] > flat.values()[0]);
        let expected = 1.0 / (1.0 + (-0.5f64).exp());
        assert!((f64::from(flat.values()[0]) - expected).abs() < 1e-6);
    }

    #[test]
    fn upsample_constant_and_blocks() {
        let c = AlignmentTensor::new(2, 2, 2, 20.0, vec![5.0; 8]).unwrap();
        for mode in [UpsampleMode::Nearest, UpsampleMode::Linear] {
            let u = c.upsample(4, 4, 4, mode).unwrap();
            assert!(u.values().iter().all(|&v| v == 5.0));
            assert_eq!(u.frame_ms(), 10.0);
        }
        let u = series(&[1.0, 3.0]).upsample(1, 1, 4, UpsampleMode::Nearest).unwrap();
        assert_eq!(u.values(), &[1.0, 1.0, 3.0, 3.0]);
    }

    #[test]
    fn upsample_non_integer_nearest() {
        let u = series(&[1.0, 2.0, 3.0]).upsample(1, 1, 5, UpsampleMode::Nearest).unwrap();
        // floor(i * 3 / 5) for i in 0..5
        assert_eq!(u.values(), &[1.0, 1.0, 2.0, 2.0, 3.0]);
    }

    #[test]
    fn upsample_rejects_downsampling() {
        let c = AlignmentTensor::zeros(2, 2, 2, 10.0).unwrap();
        assert!(c.upsample(1, 2, 2, UpsampleMode::Nearest).is_err());
    }
}
