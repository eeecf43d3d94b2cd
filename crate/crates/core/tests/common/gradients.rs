//! Finite-difference checks. Each returns the worst relative error seen over
//! `instances` random cases.

use rand::Rng;
use signcnn::layers::{softmax, Activation, Dropout, MaxPool2D};
use signcnn::model::{Mode, ModelConfig, SequentialModel};
use signcnn::train::{sparse_ce_from_logits, sparse_ce_loss};
use signcnn::Tensor;

use super::*;

pub fn conv(instances: u64, relu: bool) -> f64 {
    let mut worst = 0.0f64;
    for seed in 0..instances {
        let mut r = rng(100 + seed);
        let (n, h, w, c, f) = (
            r.gen_range(1..=2),
            r.gen_range(3..=6),
            r.gen_range(3..=6),
            r.gen_range(1..=3),
            r.gen_range(1..=4),
        );
        let x = random_tensor(&mut r, &[n, h, w, c], 1.0);
        let wt = random_tensor(&mut r, &[3, 3, c, f], 0.5);
        let b = random_tensor(&mut r, &[f], 0.2);
        let layer = conv_with(wt.clone(), b.clone(), relu);
        let (y, cache) = layer.forward_cached(&x).unwrap();
        let up = random_tensor(&mut r, y.dims(), 1.0);
        let g = layer.backward(&cache, &up, true).unwrap();

        let num_x = numeric_grad(&x, |x| dot(&layer.forward(x).unwrap(), &up));
        let num_w = numeric_grad(&wt, |wt| {
            dot(&conv_with(wt.clone(), b.clone(), relu).forward(&x).unwrap(), &up)
        });
        let num_b = numeric_grad(&b, |b| {
            dot(&conv_with(wt.clone(), b.clone(), relu).forward(&x).unwrap(), &up)
        });
        worst = worst
            .max(max_rel_err(g.input.unwrap().data(), &num_x))
            .max(max_rel_err(g.weights.unwrap().data(), &num_w))
            .max(max_rel_err(g.bias.unwrap().data(), &num_b));
    }
    worst
}

pub fn dense(instances: u64, activation: Activation) -> f64 {
    let mut worst = 0.0f64;
    for seed in 0..instances {
        let mut r = rng(200 + seed);
        let (n, fin, units) = (r.gen_range(1..=4), r.gen_range(2..=10), r.gen_range(2..=8));
        let x = random_tensor(&mut r, &[n, fin], 1.0);
        let wt = random_tensor(&mut r, &[fin, units], 0.7);
        let b = random_tensor(&mut r, &[units], 0.2);
        let layer = dense_with(wt.clone(), b.clone(), activation);
        let (y, cache) = layer.forward_cached(&x).unwrap();
        let up = random_tensor(&mut r, y.dims(), 1.0);
        let g = layer.backward(&cache, &up, true).unwrap();

        let num_x = numeric_grad(&x, |x| dot(&layer.forward(x).unwrap(), &up));
        let num_w = numeric_grad(&wt, |wt| {
            dot(&dense_with(wt.clone(), b.clone(), activation).forward(&x).unwrap(), &up)
        });
        let num_b = numeric_grad(&b, |b| {
            dot(&dense_with(wt.clone(), b.clone(), activation).forward(&x).unwrap(), &up)
        });
        worst = worst
            .max(max_rel_err(g.input.unwrap().data(), &num_x))
            .max(max_rel_err(g.weights.unwrap().data(), &num_w))
            .max(max_rel_err(g.bias.unwrap().data(), &num_b));
    }
    worst
}

/// Inputs are distinct multiples of 0.01 in shuffled order, so window maxima
/// are separated by far more than the probe step.
pub fn maxpool(instances: u64) -> f64 {
    use rand::seq::SliceRandom;
    let mut worst = 0.0f64;
    for seed in 0..instances {
        let mut r = rng(300 + seed);
        let (n, h, w, c) = (r.gen_range(1..=2), r.gen_range(2..=7), r.gen_range(2..=7), r.gen_range(1..=3));
        let len = n * h * w * c;
        let mut vals: Vec<f64> = (0..len).map(|i| i as f64 * 0.01 - 1.0).collect();
        vals.shuffle(&mut r);
        let x = Tensor::from_vec(&[n, h, w, c], vals).unwrap();
        let (y, rec) = MaxPool2D.forward(&x).unwrap();
        let up = random_tensor(&mut r, y.dims(), 1.0);
        let g = MaxPool2D.backward(&rec, &up).unwrap();
        let num = numeric_grad(&x, |x| dot(&MaxPool2D.forward(x).unwrap().0, &up));
        worst = worst.max(max_rel_err(g.data(), &num));
    }
    worst
}

/// The mask is held fixed by reseeding, so dropout is linear in its input.
pub fn dropout(instances: u64) -> f64 {
    let mut worst = 0.0f64;
    for seed in 0..instances {
        let mut r = rng(400 + seed);
        let layer = Dropout::new(r.gen_range(0.1..0.7)).unwrap();
        let dims = [r.gen_range(1..=4), r.gen_range(1..=20)];
        let x = random_tensor(&mut r, &dims, 1.0);
        let (y, mask) = layer.forward(&x, true, &mut rng(seed));
        let up = random_tensor(&mut r, y.dims(), 1.0);
        let g = mask.backward(&up).unwrap();
        let num = numeric_grad(&x, |x| dot(&layer.forward(x, true, &mut rng(seed)).0, &up));
        worst = worst.max(max_rel_err(g.data(), &num));
    }
    worst
}

/// Softmax followed by cross-entropy, differentiated with respect to logits.
pub fn cross_entropy(instances: u64) -> f64 {
    let mut worst = 0.0f64;
    for seed in 0..instances {
        let mut r = rng(500 + seed);
        let (n, k) = (r.gen_range(1..=5), r.gen_range(2..=24));
        let logits = random_tensor(&mut r, &[n, k], 3.0);
        let labels: Vec<usize> = (0..n).map(|_| r.gen_range(0..k)).collect();
        let (_, g) = sparse_ce_from_logits(&logits, &labels).unwrap();
        let num = numeric_grad(&logits, |z| sparse_ce_loss(&softmax(z).unwrap(), &labels).unwrap().0);
        worst = worst.max(max_rel_err(g.data(), &num));
    }
    worst
}

/// Whole canonical network at `f64`: loss gradient with respect to `samples`
/// randomly chosen parameters for a batch of four.
pub fn model(instances: u64, samples: usize) -> f64 {
    let mut worst = 0.0f64;
    for seed in 0..instances {
        let mut model = SequentialModel::<f64>::build(&ModelConfig::default(), seed).unwrap();
        model.set_mode(Mode::Training);
        let mut r = rng(600 + seed);
        let x = Tensor::from_vec(&[4, 28, 28, 1], (0..4 * 784).map(|_| r.gen_range(0.0..1.0)).collect()).unwrap();
        let labels: Vec<usize> = (0..4).map(|_| r.gen_range(0..24)).collect();
        let drop_seed = 700 + seed;
        let loss = |m: &SequentialModel<f64>| {
            let pass = m.forward_train(&x, &mut super::rng(drop_seed)).unwrap();
            sparse_ce_from_logits(pass.logits(), &labels).unwrap().0
        };

        let pass = model.forward_train(&x, &mut super::rng(drop_seed)).unwrap();
        let (_, dlogits) = sparse_ce_from_logits(pass.logits(), &labels).unwrap();
        let grads = model.backward(pass, &dlogits).unwrap();
        let analytic: Vec<Tensor<f64>> = grads.params().into_iter().cloned().collect();

        let tensors = analytic.len();
        for s in 0..samples {
            // cycle through every parameter tensor so biases are covered too
            let t = s % tensors;
            let i = r.gen_range(0..analytic[t].len());
            let orig = model.parameters()[t].data()[i];
            // small step: thousands of ReLU and pooling kinks sit downstream of each parameter
            let h = 1e-7 * orig.abs().max(1.0);
            model.parameters_mut()[t].data_mut()[i] = orig + h;
            let up = loss(&model);
            model.parameters_mut()[t].data_mut()[i] = orig - h;
            let down = loss(&model);
            model.parameters_mut()[t].data_mut()[i] = orig;
            let numeric = (up - down) / (2.0 * h);
            worst = worst.max(rel_err(analytic[t].data()[i], numeric));
        }
    }
    worst
}
