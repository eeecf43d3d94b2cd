//! Layer outputs against the direct nested-loop definitions. Each returns the
//! worst relative deviation over `instances` random cases.

use rand::Rng;
use signcnn::layers::{Conv2D, MaxPool2D};
use signcnn::Tensor;

use super::*;

fn rel(a: f64, b: f64) -> f64 {
    (a - b).abs() / b.abs().max(1.0)
}

/// Production precision (`f32`) against an `f64` oracle.
pub fn conv(instances: u64) -> f64 {
    let mut worst = 0.0f64;
    for seed in 0..instances {
        let mut r = rng(1000 + seed);
        let dims = [r.gen_range(1..=3), r.gen_range(3..=9), r.gen_range(3..=9), r.gen_range(1..=4)];
        let f = r.gen_range(1..=5);
        let relu = seed % 2 == 0;
        let x = random_tensor(&mut r, &dims, 1.0);
        let w = random_tensor(&mut r, &[3, 3, dims[3], f], 1.0);
        let b = random_tensor(&mut r, &[f], 0.5);
        let expected = naive_conv(x.data(), dims, w.data(), b.data(), f, relu);
        let layer = Conv2D::<f32>::new(w.cast(), b.cast(), relu).unwrap();
        let got = layer.forward(&x.cast::<f32>()).unwrap();
        assert_eq!(got.dims(), &[dims[0], dims[1] - 2, dims[2] - 2, f]);
        for (g, e) in got.data().iter().zip(&expected) {
            worst = worst.max(rel(*g as f64, *e));
        }
    }
    worst
}

/// Forward values and backward routing. Inputs are rounded to a coarse grid so
/// ties occur and the first-maximum rule is exercised.
pub fn maxpool(instances: u64) -> f64 {
    let mut worst = 0.0f64;
    for seed in 0..instances {
        let mut r = rng(2000 + seed);
        let dims = [r.gen_range(1..=3), r.gen_range(2..=9), r.gen_range(2..=9), r.gen_range(1..=4)];
        let len: usize = dims.iter().product();
        let vals: Vec<f64> = (0..len).map(|_| (r.gen_range(-1.0f64..1.0) * 4.0).round() / 4.0).collect();
        let (expected, arg) = naive_pool(&vals, dims);
        let x = Tensor::from_vec(&dims, vals.iter().map(|&v| v as f32).collect()).unwrap();
        let (y, rec) = MaxPool2D.forward(&x).unwrap();
        assert_eq!(y.dims(), &[dims[0], dims[1] / 2, dims[2] / 2, dims[3]]);
        for (g, e) in y.data().iter().zip(&expected) {
            worst = worst.max(rel(*g as f64, *e));
        }
        let up: Vec<f32> = (0..y.len()).map(|_| r.gen_range(-1.0..1.0)).collect();
        let gx = MaxPool2D
            .backward(&rec, &Tensor::from_vec(y.dims(), up.clone()).unwrap())
            .unwrap();
        let mut routed = vec![0.0f64; len];
        for (o, &i) in arg.iter().enumerate() {
            routed[i] += up[o] as f64;
        }
        for (g, e) in gx.data().iter().zip(&routed) {
            worst = worst.max(rel(*g as f64, *e));
        }
    }
    worst
}
