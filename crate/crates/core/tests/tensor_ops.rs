mod common;

use avalign::tensor::{build_alignment_tensor, EmbeddingGrid, EmbeddingSequence};
use avalign::{AlignmentTensor, UpsampleMode};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use common::{random_tensor, Fill};

fn tensor_strategy() -> impl Strategy<Value = AlignmentTensor> {
    (1usize..=8, 1usize..=8, 1usize..=16, any::<u64>(), 0usize..3).prop_map(|(w, h, t, seed, fill)| {
        let fill = [Fill::Uniform, Fill::Sparse, Fill::Zero][fill];
        random_tensor(&mut ChaCha8Rng::seed_from_u64(seed), w, h, t, fill)
    })
}

// Scalar-loop references, written against (x, y, t) indexing only.

fn oracle_per_frame(t: &AlignmentTensor) -> Vec<f64> {
    let mut out = vec![0.0; t.values().len()];
    for f in 0..t.frames() {
        let mut sum = 0.0;
        for y in 0..t.height() {
            for x in 0..t.width() {
                sum += t.get(x, y, f) as f64;
            }
        }
        for y in 0..t.height() {
            for x in 0..t.width() {
                out[t.index(x, y, f)] = if sum == 0.0 {
                    1.0 / (t.width() * t.height()) as f64
                } else {
                    t.get(x, y, f) as f64 / sum
                };
            }
        }
    }
    out
}

fn oracle_per_pixel(t: &AlignmentTensor) -> Vec<f64> {
    let mut out = vec![0.0; t.values().len()];
    for y in 0..t.height() {
        for x in 0..t.width() {
            let mut sum = 0.0;
            for f in 0..t.frames() {
                sum += t.get(x, y, f) as f64;
            }
            for f in 0..t.frames() {
                out[t.index(x, y, f)] = if sum == 0.0 {
                    1.0 / t.frames() as f64
                } else {
                    t.get(x, y, f) as f64 / sum
                };
            }
        }
    }
    out
}

fn oracle_softmax_space(t: &AlignmentTensor, temp: f64) -> Vec<f64> {
    let mut out = vec![0.0; t.values().len()];
    for f in 0..t.frames() {
        let mut sum = 0.0;
        for y in 0..t.height() {
            for x in 0..t.width() {
                sum += (t.get(x, y, f) as f64 / temp).exp();
            }
        }
        for y in 0..t.height() {
            for x in 0..t.width() {
                out[t.index(x, y, f)] = (t.get(x, y, f) as f64 / temp).exp() / sum;
            }
        }
    }
    out
}

fn oracle_softmax_time(t: &AlignmentTensor, temp: f64) -> Vec<f64> {
    let mut out = vec![0.0; t.values().len()];
    for y in 0..t.height() {
        for x in 0..t.width() {
            let sum: f64 = (0..t.frames()).map(|f| (t.get(x, y, f) as f64 / temp).exp()).sum();
            for f in 0..t.frames() {
                out[t.index(x, y, f)] = (t.get(x, y, f) as f64 / temp).exp() / sum;
            }
        }
    }
    out
}

/// Source coordinate of destination index `i` along one axis, as a pair of
/// (index, weight) taps.
fn taps(i: usize, src: usize, dst: usize) -> [(usize, f64); 2] {
    let mut pos = (i as f64 + 0.5) * src as f64 / dst as f64 - 0.5;
    if pos < 0.0 {
        pos = 0.0;
    }
    if pos > (src - 1) as f64 {
        pos = (src - 1) as f64;
    }
    let lo = pos.floor() as usize;
    let hi = if lo + 1 < src { lo + 1 } else { lo };
    let frac = pos - lo as f64;
    [(lo, 1.0 - frac), (hi, frac)]
}

/// Trilinear interpolation as an explicit weighted sum over the 8 corners.
fn oracle_linear(t: &AlignmentTensor, tw: usize, th: usize, tf: usize) -> Vec<f64> {
    let mut out = Vec::new();
    for f in 0..tf {
        for y in 0..th {
            for x in 0..tw {
                let mut acc = 0.0;
                for (sf, wf) in taps(f, t.frames(), tf) {
                    for (sy, wy) in taps(y, t.height(), th) {
                        for (sx, wx) in taps(x, t.width(), tw) {
                            acc += wf * wy * wx * t.get(sx, sy, sf) as f64;
                        }
                    }
                }
                out.push(acc);
            }
        }
    }
    out
}

fn assert_matches(actual: &AlignmentTensor, expected: &[f64], tol: f64) -> Result<(), TestCaseError> {
    prop_assert_eq!(actual.values().len(), expected.len());
    for (i, (&a, &e)) in actual.values().iter().zip(expected).enumerate() {
        prop_assert!((a as f64 - e).abs() < tol, "offset {}: {} vs {}", i, a, e);
    }
    Ok(())
}

fn frame_sums(t: &AlignmentTensor) -> Vec<f64> {
    (0..t.frames()).map(|f| t.frame(f).iter().map(|&v| v as f64).sum()).collect()
}

fn pixel_sums(t: &AlignmentTensor) -> Vec<f64> {
    let mut sums = vec![0.0; t.frame_len()];
    for f in 0..t.frames() {
        for (s, &v) in sums.iter_mut().zip(t.frame(f)) {
            *s += v as f64;
        }
    }
    sums
}

#[test]
fn build_matches_triple_loop() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let (w, h, n, d) = (2, 2, 3, 4);
    let grid: Vec<f32> = (0..w * h * d).map(|_| rng.random_range(-1.0..1.0)).collect();
    let seq: Vec<f32> = (0..n * d).map(|_| rng.random_range(-1.0..1.0)).collect();
    let img = EmbeddingGrid::new(w, h, d, grid.clone()).unwrap();
    let aud = EmbeddingSequence::new(n, d, 10.0, seq.clone()).unwrap();
    let t = build_alignment_tensor(&img, &aud, true).unwrap();
    for f in 0..n {
        for y in 0..h {
            for x in 0..w {
                let mut dot = 0.0f64;
                for k in 0..d {
                    dot += grid[(y * w + x) * d + k] as f64 * seq[f * d + k] as f64;
                }
                let expected = dot.max(0.0);
                assert!((t.get(x, y, f) as f64 - expected).abs() < 1e-6);
            }
        }
    }
    assert_eq!((t.width(), t.height(), t.frames()), (2, 2, 3));
}

#[test]
fn linear_upsample_of_two_frames() {
    let t = AlignmentTensor::new(1, 1, 2, 20.0, vec![1.0, 3.0]).unwrap();
    let u = t.upsample(1, 1, 4, UpsampleMode::Linear).unwrap();
    // half-cell centers -0.25, 0.25, 0.75, 1.25 clamped into [0, 1]
    let frozen = [1.0, 1.5, 2.5, 3.0];
    for (a, e) in u.values().iter().zip(frozen) {
        assert!((*a as f64 - e).abs() < 1e-6);
    }
    let oracle = oracle_linear(&t, 1, 1, 4);
    for (a, e) in oracle.iter().zip(frozen) {
        assert!((a - e).abs() < 1e-12);
    }
    assert_eq!(u.frame_ms(), 10.0);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn normalizations_match_oracle(t in tensor_strategy()) {
        assert_matches(&t.normalize_per_frame(), &oracle_per_frame(&t), 1e-6)?;
        assert_matches(&t.normalize_per_pixel(), &oracle_per_pixel(&t), 1e-6)?;
    }

    #[test]
    fn softmax_matches_oracle(t in tensor_strategy(), temp in 0.25f32..4.0) {
        assert_matches(&t.softmax_space(temp).unwrap(), &oracle_softmax_space(&t, temp as f64), 1e-6)?;
        assert_matches(&t.softmax_time(temp).unwrap(), &oracle_softmax_time(&t, temp as f64), 1e-6)?;
    }

    #[test]
    fn distributions_sum_to_one(t in tensor_strategy()) {
        for s in frame_sums(&t.normalize_per_frame()).into_iter().chain(frame_sums(&t.softmax_space(1.0).unwrap())) {
            prop_assert!((s - 1.0).abs() < 1e-6);
        }
        for s in pixel_sums(&t.normalize_per_pixel()).into_iter().chain(pixel_sums(&t.softmax_time(1.0).unwrap())) {
            prop_assert!((s - 1.0).abs() < 1e-6);
        }
    }

    #[test]
    fn normalizations_are_idempotent(t in tensor_strategy()) {
        let once = t.normalize_per_frame();
        let twice = once.normalize_per_frame();
        let expected: Vec<f64> = once.values().iter().map(|&v| v as f64).collect();
        assert_matches(&twice, &expected, 1e-6)?;

        let once = t.normalize_per_pixel();
        let twice = once.normalize_per_pixel();
        let expected: Vec<f64> = once.values().iter().map(|&v| v as f64).collect();
        assert_matches(&twice, &expected, 1e-6)?;
    }

    #[test]
    fn normalizations_ignore_positive_scales(t in tensor_strategy(), seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let frame_scale: Vec<f32> = (0..t.frames()).map(|_| rng.random_range(0.1..10.0)).collect();
        let by_frame = AlignmentTensor::from_fn(t.width(), t.height(), t.frames(), 10.0, |x, y, f| {
            t.get(x, y, f) * frame_scale[f]
        }).unwrap();
        let expected: Vec<f64> = t.normalize_per_frame().values().iter().map(|&v| v as f64).collect();
        assert_matches(&by_frame.normalize_per_frame(), &expected, 1e-6)?;

        let pixel_scale: Vec<f32> = (0..t.frame_len()).map(|_| rng.random_range(0.1..10.0)).collect();
        let by_pixel = AlignmentTensor::from_fn(t.width(), t.height(), t.frames(), 10.0, |x, y, f| {
            t.get(x, y, f) * pixel_scale[y * t.width() + x]
        }).unwrap();
        let expected: Vec<f64> = t.normalize_per_pixel().values().iter().map(|&v| v as f64).collect();
        assert_matches(&by_pixel.normalize_per_pixel(), &expected, 1e-6)?;
    }

    #[test]
    fn upsample_matches_oracles(t in tensor_strategy(), fx in 1usize..4, fy in 1usize..4, ft in 1usize..3, extra in 0usize..3) {
        let (tw, th, tf) = (t.width() * fx + extra, t.height() * fy, t.frames() * ft + extra);
        let linear = t.upsample(tw, th, tf, UpsampleMode::Linear).unwrap();
        assert_matches(&linear, &oracle_linear(&t, tw, th, tf), 1e-5)?;

        let nearest = t.upsample(tw, th, tf, UpsampleMode::Nearest).unwrap();
        for f in 0..tf {
            for y in 0..th {
                for x in 0..tw {
                    prop_assert_eq!(
                        nearest.get(x, y, f),
                        t.get(x * t.width() / tw, y * t.height() / th, f * t.frames() / tf)
                    );
                }
            }
        }
    }

    #[test]
    fn nearest_then_block_average_recovers(t in tensor_strategy(), fx in 1usize..5, fy in 1usize..5, ft in 1usize..4) {
        let u = t.upsample(t.width() * fx, t.height() * fy, t.frames() * ft, UpsampleMode::Nearest).unwrap();
        for f in 0..t.frames() {
            for y in 0..t.height() {
                for x in 0..t.width() {
                    let mut sum = 0.0f64;
                    for df in 0..ft {
                        for dy in 0..fy {
                            for dx in 0..fx {
                                sum += u.get(x * fx + dx, y * fy + dy, f * ft + df) as f64;
                            }
                        }
                    }
                    prop_assert_eq!((sum / (fx * fy * ft) as f64) as f32, t.get(x, y, f));
                }
            }
        }
    }

    #[test]
    fn clamped_unit_products_lie_in_unit_interval(seed in any::<u64>(), w in 1usize..6, h in 1usize..6, n in 1usize..8, d in 1usize..8) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let grid = (0..w * h * d).map(|_| rng.random_range(-1.0f32..1.0)).collect();
        let seq = (0..n * d).map(|_| rng.random_range(-1.0f32..1.0)).collect();
        let img = EmbeddingGrid::new(w, h, d, grid).unwrap().unit_normalized();
        let aud = EmbeddingSequence::new(n, d, 10.0, seq).unwrap().unit_normalized();
        let t = build_alignment_tensor(&img, &aud, true).unwrap();
        prop_assert!(t.values().iter().all(|&v| (0.0..=1.0 + 1e-6).contains(&v)));
    }
}
