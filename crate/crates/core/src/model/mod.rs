//! Sequential layer stack, parameter accounting and the canonical classifier.

mod file;

pub use file::{from_bytes, load, save, to_bytes, FORMAT_VERSION, MAGIC};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::layers::{
    Activation, Conv2D, ConvCache, Dense, DenseCache, Dropout, DropoutMask, LayerGradients,
    MaxPool2D, PoolRecord,
};
use crate::tensor::{Scalar, Tensor};
use crate::train::AdamState;

/// Height, width and channels of one input image.
pub const INPUT_DIMS: [usize; 3] = [28, 28, 1];
pub const NUM_CLASSES: usize = 24;

#[derive(Clone, Debug, PartialEq)]
pub enum Layer<T> {
    Conv2D(Conv2D<T>),
    MaxPool2D(MaxPool2D),
    Flatten,
    Dense(Dense<T>),
    Dropout(Dropout),
}

impl<T: Scalar> Layer<T> {
    pub fn kind(&self) -> &'static str {
        match self {
            Layer::Conv2D(_) => "conv2d",
            Layer::MaxPool2D(_) => "maxpool2d",
            Layer::Flatten => "flatten",
            Layer::Dense(_) => "dense",
            Layer::Dropout(_) => "dropout",
        }
    }

    pub fn param_count(&self) -> usize {
        match self {
            Layer::Conv2D(c) => c.param_count(),
            Layer::Dense(d) => d.param_count(),
            _ => 0,
        }
    }

    pub fn params(&self) -> Vec<&Tensor<T>> {
        match self {
            Layer::Conv2D(c) => vec![c.weights(), c.bias()],
            Layer::Dense(d) => vec![d.weights(), d.bias()],
            _ => Vec::new(),
        }
    }

    pub fn params_mut(&mut self) -> Vec<&mut Tensor<T>> {
        match self {
            Layer::Conv2D(c) => c.params_mut().into(),
            Layer::Dense(d) => d.params_mut().into(),
            _ => Vec::new(),
        }
    }

    /// Output shape for a given input shape (batch dimension included).
    pub fn output_dims(&self, input: &[usize]) -> Result<Vec<usize>> {
        match self {
            Layer::Conv2D(c) => Ok(c.output_dims(input)?.to_vec()),
            Layer::MaxPool2D(p) => Ok(p.output_dims(input)?.to_vec()),
            Layer::Flatten => Ok(vec![input[0], input[1..].iter().product()]),
            Layer::Dense(d) => {
                if input.len() != 2 || input[1] != d.in_features() {
                    return Err(Error::ShapeMismatch {
                        op: "dense input",
                        expected: vec![input[0], d.in_features()],
                        actual: input.to_vec(),
                    });
                }
                Ok(vec![input[0], d.units()])
            }
            Layer::Dropout(_) => Ok(input.to_vec()),
        }
    }

    fn forward_inference(&self, x: &Tensor<T>) -> Result<Tensor<T>> {
        match self {
            Layer::Conv2D(c) => c.forward(x),
            Layer::MaxPool2D(p) => Ok(p.forward(x)?.0),
            Layer::Flatten => flatten(x),
            Layer::Dense(d) => d.forward(x),
            Layer::Dropout(_) => Ok(x.clone()),
        }
    }
}

fn flatten<T: Scalar>(x: &Tensor<T>) -> Result<Tensor<T>> {
    let n = x.dims()[0];
    x.reshape(&[n, x.len() / n])
}

/// Hyperparameters of the canonical stack. Topology is fixed.
#[derive(Clone, Debug, PartialEq)]
pub struct ModelConfig {
    pub filters: [usize; 3],
    pub dense_units: usize,
    pub dropout: f64,
    pub num_classes: usize,
}

impl Default for ModelConfig {
    fn default() -> Self {
        ModelConfig {
            filters: [32, 64, 128],
            dense_units: 256,
            dropout: 0.5,
            num_classes: NUM_CLASSES,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Mode {
    Training,
    Inference,
}

/// Per-layer state retained by a training-mode forward pass.
#[derive(Clone, Debug)]
enum LayerCache<T> {
    Conv(ConvCache<T>),
    Pool(PoolRecord),
    Flatten(Vec<usize>),
    Dense(DenseCache<T>),
    /// Final softmax layer: only its input is needed, the loss supplies the
    /// logit gradient directly.
    Logits(Tensor<T>),
    Dropout(DropoutMask<T>),
}

/// Result of [`SequentialModel::forward_train`]; consumed by
/// [`SequentialModel::backward`].
#[derive(Debug)]
pub struct ForwardPass<T> {
    caches: Vec<LayerCache<T>>,
    logits: Tensor<T>,
}

impl<T: Scalar> ForwardPass<T> {
    /// Pre-softmax output of the final layer, `[N, classes]`.
    pub fn logits(&self) -> &Tensor<T> {
        &self.logits
    }
}

/// Gradients for every layer, in layer order.
#[derive(Clone, Debug)]
pub struct Gradients<T> {
    pub layers: Vec<LayerGradients<T>>,
}

impl<T: Scalar> Gradients<T> {
    /// Parameter gradients in the same order as [`SequentialModel::parameters`].
    pub fn params(&self) -> Vec<&Tensor<T>> {
        self.layers
            .iter()
            .flat_map(|g| g.weights.iter().chain(g.bias.iter()))
            .collect()
    }
}

#[derive(Clone, Debug)]
pub struct SequentialModel<T> {
    layers: Vec<Layer<T>>,
    input_dims: [usize; 3],
    num_classes: usize,
    mode: Mode,
    optimizer: Option<AdamState<T>>,
}

/// The canonical classifier at training precision.
pub fn build_model(seed: u64) -> SequentialModel<f32> {
    SequentialModel::build(&ModelConfig::default(), seed).expect("canonical configuration is valid")
}

impl<T: Scalar> SequentialModel<T> {
    /// Conv(32)-Pool-Conv(64)-Pool-Conv(128)-Flatten-Dense(256)-Dropout-Dense(classes),
    /// Glorot-uniform kernels and zero biases drawn from `seed`.
    pub fn build(config: &ModelConfig, seed: u64) -> Result<Self> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        Self::build_with_rng(config, &mut rng)
    }

    pub fn build_with_rng<R: Rng + ?Sized>(config: &ModelConfig, rng: &mut R) -> Result<Self> {
        if config.filters.contains(&0) || config.dense_units == 0 || config.num_classes == 0 {
            return Err(Error::InvalidConfig(format!("zero-sized layer in {config:?}")));
        }
        let [f1, f2, f3] = config.filters;
        let [h, w, c] = INPUT_DIMS;
        // valid 3×3 convs and floor pooling: 28 → 26 → 13 → 11 → 5 → 3
        let side = ((((h - 2) / 2) - 2) / 2) - 2;
        debug_assert_eq!(side, ((((w - 2) / 2) - 2) / 2) - 2);
        let flat = side * side * f3;
        let layers = vec![
            Layer::Conv2D(Conv2D::glorot(c, f1, true, rng)?),
            Layer::MaxPool2D(MaxPool2D),
            Layer::Conv2D(Conv2D::glorot(f1, f2, true, rng)?),
            Layer::MaxPool2D(MaxPool2D),
            Layer::Conv2D(Conv2D::glorot(f2, f3, true, rng)?),
            Layer::Flatten,
            Layer::Dense(Dense::glorot(flat, config.dense_units, Activation::Relu, rng)?),
            Layer::Dropout(Dropout::new(config.dropout)?),
            Layer::Dense(Dense::glorot(
                config.dense_units,
                config.num_classes,
                Activation::Softmax,
                rng,
            )?),
        ];
        Self::from_layers(layers, INPUT_DIMS)
    }

    /// Validates that shapes compose and the stack ends in a softmax dense layer.
    pub fn from_layers(layers: Vec<Layer<T>>, input_dims: [usize; 3]) -> Result<Self> {
        match layers.last() {
            Some(Layer::Dense(d)) if d.activation() == Activation::Softmax => {}
            _ => {
                return Err(Error::InvalidConfig(
                    "the final layer must be a dense layer with softmax activation".into(),
                ))
            }
        }
        let mut dims = vec![1, input_dims[0], input_dims[1], input_dims[2]];
        for layer in &layers {
            dims = layer.output_dims(&dims)?;
        }
        let num_classes = dims[1];
        Ok(SequentialModel {
            layers,
            input_dims,
            num_classes,
            mode: Mode::Inference,
            optimizer: None,
        })
    }

    pub fn layers(&self) -> &[Layer<T>] {
        &self.layers
    }

    pub fn input_dims(&self) -> [usize; 3] {
        self.input_dims
    }

    pub fn num_classes(&self) -> usize {
        self.num_classes
    }

    pub fn mode(&self) -> Mode {
        self.mode
    }

    pub fn set_mode(&mut self, mode: Mode) {
        self.mode = mode;
    }

    pub fn optimizer(&self) -> Option<&AdamState<T>> {
        self.optimizer.as_ref()
    }

    pub fn attach_optimizer(&mut self, state: AdamState<T>) {
        self.optimizer = Some(state);
    }

    pub(crate) fn take_optimizer(&mut self) -> Option<AdamState<T>> {
        self.optimizer.take()
    }

    pub fn layer_param_counts(&self) -> Vec<usize> {
        self.layers.iter().map(Layer::param_count).collect()
    }

    /// Trainable parameter count, plus the optimizer's moment estimates when
    /// `include_optimizer` is set.
    pub fn count_parameters(&self, include_optimizer: bool) -> Result<usize> {
        let trainable = self.layer_param_counts().iter().sum();
        if !include_optimizer {
            return Ok(trainable);
        }
        let opt = self.optimizer.as_ref().ok_or(Error::NoOptimizer)?;
        Ok(trainable + opt.state_len())
    }

    pub fn parameters(&self) -> Vec<&Tensor<T>> {
        self.layers.iter().flat_map(Layer::params).collect()
    }

    pub fn parameters_mut(&mut self) -> Vec<&mut Tensor<T>> {
        self.layers.iter_mut().flat_map(Layer::params_mut).collect()
    }

    pub fn snapshot(&self) -> Vec<Tensor<T>> {
        self.parameters().into_iter().cloned().collect()
    }

    pub fn restore(&mut self, snapshot: &[Tensor<T>]) -> Result<()> {
        let mut params = self.parameters_mut();
        if params.len() != snapshot.len() {
            return Err(Error::LengthMismatch {
                what: "parameter snapshot",
                left: params.len(),
                right: snapshot.len(),
            });
        }
        for (p, s) in params.iter_mut().zip(snapshot) {
            if p.shape() != s.shape() {
                return Err(Error::ShapeMismatch {
                    op: "restore",
                    expected: p.dims().to_vec(),
                    actual: s.dims().to_vec(),
                });
            }
        }
        for (p, s) in params.into_iter().zip(snapshot) {
            p.data_mut().copy_from_slice(s.data());
        }
        Ok(())
    }

    fn check_batch(&self, batch: &Tensor<T>) -> Result<()> {
        let d = batch.dims();
        if d.len() != 4 || d[1..] != self.input_dims {
            let mut expected = vec![d.first().copied().unwrap_or(1)];
            expected.extend_from_slice(&self.input_dims);
            return Err(Error::ShapeMismatch {
                op: "model input",
                expected,
                actual: d.to_vec(),
            });
        }
        Ok(())
    }

    /// Output of every layer for an inference pass, in layer order.
    pub fn forward_trace(&self, batch: &Tensor<T>) -> Result<Vec<Tensor<T>>> {
        self.check_batch(batch)?;
        let mut outs: Vec<Tensor<T>> = Vec::with_capacity(self.layers.len());
        for layer in &self.layers {
            let next = layer.forward_inference(outs.last().unwrap_or(batch))?;
            outs.push(next);
        }
        Ok(outs)
    }

    /// Inference-mode logits (pre-softmax), `[N, classes]`.
    pub fn forward_logits(&self, batch: &Tensor<T>) -> Result<Tensor<T>> {
        self.check_batch(batch)?;
        let (last, body) = self.layers.split_last().expect("model has layers");
        let mut x = batch.clone();
        for layer in body {
            x = layer.forward_inference(&x)?;
        }
        match last {
            Layer::Dense(d) => d.pre_activation(&x),
            _ => unreachable!("validated at construction"),
        }
    }

    /// Inference-mode class probabilities, `[N, classes]`. Dropout is inert.
    pub fn forward(&self, batch: &Tensor<T>) -> Result<Tensor<T>> {
        crate::layers::softmax(&self.forward_logits(batch)?)
    }

    /// Training-mode forward pass: dropout draws from `rng` and every layer
    /// keeps what backward needs.
    pub fn forward_train<R: Rng + ?Sized>(&self, batch: &Tensor<T>, rng: &mut R) -> Result<ForwardPass<T>> {
        if self.mode != Mode::Training {
            return Err(Error::InferenceMode);
        }
        self.check_batch(batch)?;
        let last = self.layers.len() - 1;
        let mut caches = Vec::with_capacity(self.layers.len());
        let mut x = batch.clone();
        for (i, layer) in self.layers.iter().enumerate() {
            let (y, cache) = match layer {
                Layer::Conv2D(c) => {
                    let (y, cache) = c.forward_cached(&x)?;
                    (y, LayerCache::Conv(cache))
                }
                Layer::MaxPool2D(p) => {
                    let (y, rec) = p.forward(&x)?;
                    (y, LayerCache::Pool(rec))
                }
                Layer::Flatten => (flatten(&x)?, LayerCache::Flatten(x.dims().to_vec())),
                Layer::Dense(d) if i == last => (d.pre_activation(&x)?, LayerCache::Logits(x)),
                Layer::Dense(d) => {
                    let (y, cache) = d.forward_cached(&x)?;
                    (y, LayerCache::Dense(cache))
                }
                Layer::Dropout(drop) => {
                    let (y, mask) = drop.forward(&x, true, rng);
                    (y, LayerCache::Dropout(mask))
                }
            };
            caches.push(cache);
            x = y;
        }
        Ok(ForwardPass { caches, logits: x })
    }

    /// Backpropagates the gradient of the loss with respect to the logits.
    pub fn backward(&self, pass: ForwardPass<T>, logit_grad: &Tensor<T>) -> Result<Gradients<T>> {
        if pass.caches.len() != self.layers.len() {
            return Err(Error::LengthMismatch {
                what: "forward caches vs layers",
                left: pass.caches.len(),
                right: self.layers.len(),
            });
        }
        if logit_grad.shape() != pass.logits.shape() {
            return Err(Error::ShapeMismatch {
                op: "model backward",
                expected: pass.logits.dims().to_vec(),
                actual: logit_grad.dims().to_vec(),
            });
        }
        let mut grads: Vec<LayerGradients<T>> = Vec::with_capacity(self.layers.len());
        let mut upstream = logit_grad.clone();
        for (i, (layer, cache)) in self.layers.iter().zip(pass.caches).enumerate().rev() {
            let want_input = i > 0;
            let g = match (layer, cache) {
                (Layer::Conv2D(c), LayerCache::Conv(cache)) => c.backward(&cache, &upstream, want_input)?,
                (Layer::MaxPool2D(p), LayerCache::Pool(rec)) => {
                    LayerGradients::input_only(p.backward(&rec, &upstream)?)
                }
                (Layer::Flatten, LayerCache::Flatten(dims)) => {
                    LayerGradients::input_only(upstream.reshape(&dims)?)
                }
                (Layer::Dense(d), LayerCache::Logits(input)) => {
                    d.backward_from_pre_activation(&input, &upstream, want_input)?
                }
                (Layer::Dense(d), LayerCache::Dense(cache)) => d.backward(&cache, &upstream, want_input)?,
                (Layer::Dropout(_), LayerCache::Dropout(mask)) => {
                    LayerGradients::input_only(mask.backward(&upstream)?)
                }
                (layer, _) => {
                    return Err(Error::InvalidConfig(format!(
                        "forward cache for layer {i} does not match a {} layer",
                        layer.kind()
                    )))
                }
            };
            if let Some(input) = &g.input {
                upstream = input.clone();
            }
            grads.push(g);
        }
        grads.reverse();
        Ok(Gradients { layers: grads })
    }
}
