#![allow(dead_code)]

pub mod gradients;
pub mod oracles;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use signcnn::data::{Dataset, PIXELS};
use signcnn::layers::{Activation, Conv2D, Dense};
use signcnn::Tensor;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn random_tensor(rng: &mut impl Rng, dims: &[usize], scale: f64) -> Tensor<f64> {
    let n = dims.iter().product();
    Tensor::from_vec(dims, (0..n).map(|_| rng.gen_range(-scale..scale)).collect()).unwrap()
}

/// Relative error with a small floor so exact zeros on both sides compare as equal.
pub fn rel_err(a: f64, b: f64) -> f64 {
    (a - b).abs() / a.abs().max(b.abs()).max(1e-6)
}

/// Central difference of `f` at every coordinate of `x`.
pub fn numeric_grad(x: &Tensor<f64>, mut f: impl FnMut(&Tensor<f64>) -> f64) -> Vec<f64> {
    let mut probe = x.clone();
    (0..x.len())
        .map(|i| {
            let orig = probe.data()[i];
            let h = 1e-5 * orig.abs().max(1.0);
            probe.data_mut()[i] = orig + h;
            let up = f(&probe);
            probe.data_mut()[i] = orig - h;
            let down = f(&probe);
            probe.data_mut()[i] = orig;
            (up - down) / (2.0 * h)
        })
        .collect()
}

pub fn max_rel_err(analytic: &[f64], numeric: &[f64]) -> f64 {
    assert_eq!(analytic.len(), numeric.len());
    analytic
        .iter()
        .zip(numeric)
        .map(|(&a, &n)| rel_err(a, n))
        .fold(0.0, f64::max)
}

/// Σ r ⊙ y: a scalar whose gradient with respect to y is r.
pub fn dot(y: &Tensor<f64>, r: &Tensor<f64>) -> f64 {
    y.data().iter().zip(r.data()).map(|(a, b)| a * b).sum()
}

pub fn conv_with(weights: Tensor<f64>, bias: Tensor<f64>, relu: bool) -> Conv2D<f64> {
    Conv2D::new(weights, bias, relu).unwrap()
}

pub fn dense_with(weights: Tensor<f64>, bias: Tensor<f64>, activation: Activation) -> Dense<f64> {
    Dense::new(weights, bias, activation).unwrap()
}

/// Direct 3×3 valid cross-correlation, `[N,H,W,C] ⋆ [3,3,C,F]`.
pub fn naive_conv(input: &[f64], dims: [usize; 4], w: &[f64], b: &[f64], f: usize, relu: bool) -> Vec<f64> {
    let [n, h, wd, c] = dims;
    let (ho, wo) = (h - 2, wd - 2);
    let mut out = vec![0.0; n * ho * wo * f];
    for ni in 0..n {
        for y in 0..ho {
            for x in 0..wo {
                for fi in 0..f {
                    let mut acc = b[fi];
                    for ky in 0..3 {
                        for kx in 0..3 {
                            for ci in 0..c {
                                acc += input[((ni * h + y + ky) * wd + x + kx) * c + ci]
                                    * w[((ky * 3 + kx) * c + ci) * f + fi];
                            }
                        }
                    }
                    out[((ni * ho + y) * wo + x) * f + fi] = if relu { acc.max(0.0) } else { acc };
                }
            }
        }
    }
    out
}

/// Direct 2×2 stride-2 max pooling. Returns the pooled values and, per output,
/// the flat input index of the first maximal element in row-major window order.
pub fn naive_pool(input: &[f64], dims: [usize; 4]) -> (Vec<f64>, Vec<usize>) {
    let [n, h, w, c] = dims;
    let (ho, wo) = (h / 2, w / 2);
    let mut vals = Vec::new();
    let mut arg = Vec::new();
    for ni in 0..n {
        for y in 0..ho {
            for x in 0..wo {
                for ci in 0..c {
                    let mut best = (f64::NEG_INFINITY, 0);
                    for dy in 0..2 {
                        for dx in 0..2 {
                            let i = ((ni * h + 2 * y + dy) * w + 2 * x + dx) * c + ci;
                            if input[i] > best.0 {
                                best = (input[i], i);
                            }
                        }
                    }
                    vals.push(best.0);
                    arg.push(best.1);
                }
            }
        }
    }
    (vals, arg)
}

/// `per_class` samples of each of 24 classes; class `k` is the constant image
/// `(k + 1) / 25`.
pub fn constant_class_dataset(per_class: usize) -> Dataset {
    let labels: Vec<usize> = (0..24 * per_class).map(|i| i % 24).collect();
    let pixels = labels
        .iter()
        .flat_map(|&l| std::iter::repeat((l + 1) as f32 / 25.0).take(PIXELS))
        .collect();
    Dataset::new(pixels, labels).unwrap()
}

/// `n` samples cycling through 24 classes; every sample of class `k` is the
/// same fixed random image, drawn once per class from `seed`.
pub fn prototype_dataset(n: usize, seed: u64) -> Dataset {
    let mut r = rng(seed);
    let protos: Vec<Vec<f32>> = (0..24)
        .map(|_| (0..PIXELS).map(|_| r.gen_range(0.0..1.0)).collect())
        .collect();
    let labels: Vec<usize> = (0..n).map(|i| i % 24).collect();
    let pixels = labels.iter().flat_map(|&l| protos[l].iter().copied()).collect();
    Dataset::new(pixels, labels).unwrap()
}

/// Samples of 24 classes, each a distinct bar pattern plus uniform noise.
pub fn pattern_dataset(per_class: usize, noise: f32, seed: u64) -> Dataset {
    let mut r = rng(seed);
    let mut pixels = Vec::with_capacity(24 * per_class * PIXELS);
    let mut labels = Vec::new();
    for i in 0..24 * per_class {
        let k = i % 24;
        labels.push(k);
        for y in 0..28 {
            for x in 0..28 {
                let on = if k < 12 { (y / 2) % 12 == k } else { (x / 2) % 12 == k - 12 };
                let base = if on { 0.9 } else { 0.1 };
                pixels.push((base + r.gen_range(-noise..=noise)).clamp(0.0, 1.0));
            }
        }
    }
    Dataset::new(pixels, labels).unwrap()
}
