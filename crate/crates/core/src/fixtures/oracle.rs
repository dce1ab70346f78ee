//! Reference scores written as plain nested loops over `(x, y, t)`.
//!
//! Shares no code with [`crate::metrics`]; equivalence tests compare the two.
#![allow(clippy::needless_range_loop)]

use crate::error::{Error, Result};
use crate::ground_truth::{FrameSet, ObjectMask};
use crate::tensor::AlignmentTensor;

/// `[AS_object, AS_word, GS_object, GS_word]` at the tensor's own resolution.
pub fn oracle_scores(tensor: &AlignmentTensor, mask: &ObjectMask, span: &FrameSet) -> Result<[f64; 4]> {
    let nx = tensor.width();
    let ny = tensor.height();
    let nt = tensor.frames();
    if mask.width() != nx || mask.height() != ny {
        return Err(Error::DimensionMismatch("oracle: mask and tensor differ".into()));
    }
    let in_span: Vec<bool> = (0..nt).map(|t| span.contains(t)).collect();
    let span_len = in_span.iter().filter(|&&b| b).count();
    if span_len == 0 || span.len() != span_len {
        return Err(Error::InvalidArgument("oracle: span empty or outside tensor".into()));
    }
    let mut mask_len = 0usize;
    for y in 0..ny {
        for x in 0..nx {
            if mask.contains(x, y) {
                mask_len += 1;
            }
        }
    }
    if mask_len == 0 {
        return Err(Error::InvalidArgument("oracle: empty mask".into()));
    }
    let v = |x: usize, y: usize, t: usize| tensor.get(x, y, t) as f64;

    // AS_object: T'[x,y,t] = T / sum over x,y; average the mask share over span frames.
    let mut as_object = 0.0;
    for t in 0..nt {
        if !in_span[t] {
            continue;
        }
        let mut frame_sum = 0.0;
        for y in 0..ny {
            for x in 0..nx {
                frame_sum += v(x, y, t);
            }
        }
        for y in 0..ny {
            for x in 0..nx {
                if mask.contains(x, y) {
                    let normalized = if frame_sum == 0.0 {
                        1.0 / (nx * ny) as f64
                    } else {
                        v(x, y, t) / frame_sum
                    };
                    as_object += normalized;
                }
            }
        }
    }
    as_object /= span_len as f64;

    // AS_word: T''[x,y,t] = T / sum over t; average the span share over mask pixels.
    let mut as_word = 0.0;
    for y in 0..ny {
        for x in 0..nx {
            if !mask.contains(x, y) {
                continue;
            }
            let mut pixel_sum = 0.0;
            for t in 0..nt {
                pixel_sum += v(x, y, t);
            }
            for t in 0..nt {
                if in_span[t] {
                    as_word += if pixel_sum == 0.0 {
                        1.0 / nt as f64
                    } else {
                        v(x, y, t) / pixel_sum
                    };
                }
            }
        }
    }
    as_word /= mask_len as f64;

    // GS_object: A[x,y] = sum over span frames, normalized over the image.
    let mut a = vec![vec![0.0f64; nx]; ny];
    for t in 0..nt {
        if in_span[t] {
            for y in 0..ny {
                for x in 0..nx {
                    a[y][x] += v(x, y, t);
                }
            }
        }
    }
    let mut a_sum = 0.0;
    for row in &a {
        for &cell in row {
            a_sum += cell;
        }
    }
    let mut gs_object = 0.0;
    for y in 0..ny {
        for x in 0..nx {
            if mask.contains(x, y) {
                gs_object += if a_sum == 0.0 {
                    1.0 / (nx * ny) as f64
                } else {
                    a[y][x] / a_sum
                };
            }
        }
    }

    // GS_word: a[t] = sum over mask pixels, normalized over the utterance.
    let mut series = vec![0.0f64; nt];
    for (t, s) in series.iter_mut().enumerate() {
        for y in 0..ny {
            for x in 0..nx {
                if mask.contains(x, y) {
                    *s += v(x, y, t);
                }
            }
        }
    }
    let series_sum: f64 = series.iter().sum();
    let mut gs_word = 0.0;
    for t in 0..nt {
        if in_span[t] {
            gs_word += if series_sum == 0.0 {
                1.0 / nt as f64
            } else {
                series[t] / series_sum
            };
        }
    }

    Ok([as_object, as_word, gs_object, gs_word])
}
